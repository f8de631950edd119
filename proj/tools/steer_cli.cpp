#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "steer/benchmark.hpp"
#include "steer/io.hpp"
#include "steer/parallel.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<int> grid_n;
  std::optional<double> tol;
};

void apply(const Overrides& o, steer::RunConfig& c) {
  if (o.grid_n) c.grid_n = *o.grid_n;
  if (o.tol) c.tol = *o.tol;
  if (!o.out.empty()) c.output_dir = o.out;
  c = steer::parse_run_config(steer::to_json(c));
}

void add_common(CLI::App* cmd, Overrides& o, bool config_required) {
  auto* opt = cmd->add_option("--config", o.config, "JSON configuration file");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--grid-n", o.grid_n, "Number of grid nodes (odd)");
  cmd->add_option("--tol", o.tol, "Picard tolerance");
}

int run_cmd(const Overrides& o) {
  steer::RunConfig config = steer::load_run_config(o.config);
  apply(o, config);
  const auto outcome = steer::run_transfer(config, config.output_dir, steer::default_threads());
  if (outcome.exit_code != 0) {
    std::cerr << "steer run: " << outcome.error << '\n';
  } else {
    const auto& r = *outcome.synthesis;
    std::printf("%s: energy %.10g, terminal error %.3g, %d iterations\n",
                steer::to_string(r.method), r.energy, r.terminal_error, r.iterations);
  }
  return outcome.exit_code;
}

int bench_cmd(const Overrides& o) {
  std::vector<steer::BenchmarkProblem> suite;
  if (o.config.empty()) {
    suite = steer::default_suite(o.grid_n.value_or(401));
  } else {
    std::ifstream in(o.config);
    steer::Json j;
    try {
      in >> j;
    } catch (const steer::Json::parse_error& e) {
      throw steer::SteerError(steer::ErrorKind::kSchema, std::string("suite is not valid JSON: ") + e.what());
    }
    suite = steer::parse_suite(j);
  }
  for (auto& p : suite) apply(Overrides{"", "", o.grid_n, o.tol}, p.base);
  const std::filesystem::path out = o.out.empty() ? "bench" : o.out;
  const auto result = steer::run_benchmark(suite, out, steer::default_threads());
  std::printf("%-6s %-11s %14s %12s %12s %5s\n", "id", "method", "energy", "sup_norm",
              "term_err", "iter");
  for (const auto& row : result.rows) {
    std::printf("%-6s %-11s %14.8g %12.6g %12.3g %5d%s\n", row.problem.c_str(),
                steer::to_string(row.method), row.energy, row.sup_norm, row.terminal_error,
                row.iterations, row.ok ? "" : "  FAILED");
  }
  std::printf("wall time %.2f s\n", result.wall_seconds);
  for (const auto& f : result.failures) std::cerr << "failure: " << f << '\n';
  return result.exit_code();
}

int certify_cmd(const Overrides& o) {
  steer::RunConfig config = steer::load_run_config(o.config);
  apply(o, config);
  const auto model = steer::make_model(config.model);
  const auto box = steer::default_box(model.system, config.t0, config.T);
  const auto certs = steer::certify_model(model, config, box);
  steer::Json out{{"toolkit", {{"name", "steer"}, {"version", steer::kToolkitVersion}}},
                  {"config", steer::to_json(config)},
                  {"box", steer::to_json(box)},
                  {"certificates", steer::Json::array()}};
  bool all_passed = true;
  for (const auto& c : certs) {
    out["certificates"].push_back(steer::to_json(c));
    all_passed = all_passed && c.passed;
    std::printf("%-22s value %.9g threshold %.3g %s\n", steer::to_string(c.kind), c.value,
                c.threshold, c.passed ? "passed" : "FAILED");
  }
  std::filesystem::create_directories(config.output_dir);
  std::ofstream(std::filesystem::path(config.output_dir) / "certificates.json") << out.dump(2) << '\n';
  return all_passed ? 0 : steer::exit_code_for(steer::ErrorKind::kCoercivity);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-energy and Gramian steering for control-affine systems"};
  app.set_version_flag("--version", steer::kToolkitVersion);
  app.require_subcommand(1);
  Overrides run_o, bench_o, cert_o;
  auto* run = app.add_subcommand("run", "Solve a single transfer");
  add_common(run, run_o, true);
  auto* bench = app.add_subcommand("bench", "Run the six-problem benchmark suite");
  add_common(bench, bench_o, false);
  auto* cert = app.add_subcommand("certify", "Evaluate controllability certificates only");
  add_common(cert, cert_o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_cmd(run_o);
    if (*bench) return bench_cmd(bench_o);
    return certify_cmd(cert_o);
  } catch (const steer::SteerError& e) {
    std::cerr << "steer: " << e.what() << '\n';
    return steer::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "steer: " << e.what() << '\n';
    return 1;
  }
}
