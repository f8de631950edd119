#include "steer/benchmark.hpp"

#include <chrono>
#include <fstream>
#include <mutex>
#include <numbers>

#include "steer/parallel.hpp"

namespace steer {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Method kMethods[] = {Method::kMinEnergy, Method::kGramian, Method::kBaselineFl};

BenchmarkProblem make_entry(std::string id, std::string model, double T, std::vector<double> x0,
                            std::vector<double> x1, int grid_n) {
  BenchmarkProblem p;
  p.id = std::move(id);
  p.base.model.name = std::move(model);
  p.base.t0 = 0.0;
  p.base.T = T;
  p.base.grid_n = grid_n;
  p.base.x0 = std::move(x0);
  p.base.x1 = std::move(x1);
  p.base.certify = true;
  if (p.base.model.name == "unicycle") {
    // Seed (v, omega) = (0, dtheta / T).
    p.base.initial_control = std::vector<double>{0.0, (p.base.x1[2] - p.base.x0[2]) / T};
  }
  return p;
}

}  // namespace

std::vector<BenchmarkProblem> default_suite(int grid_n) {
  return {
      make_entry("P1", "pendulum", 2.0, {0.0, 0.0}, {kPi / 2, 0.0}, grid_n),
      make_entry("P2", "pendulum", 3.0, {0.0, 0.0}, {kPi, 0.0}, grid_n),
      make_entry("3D-1", "rnn3", 1.0, {0.0, 0.0, 0.0}, {1.0, -1.0, 0.5}, grid_n),
      make_entry("3D-2", "rnn3", 2.0, {0.5, 0.5, 0.5}, {-1.0, 1.0, 2.0}, grid_n),
      make_entry("U1", "unicycle", 1.0, {0.0, 0.0, 0.0}, {0.5, 0.5, kPi / 2}, grid_n),
      make_entry("U2", "unicycle", 2.0, {0.0, 0.0, 0.0}, {0.0, 1.0, kPi}, grid_n),
  };
}

std::vector<BenchmarkProblem> parse_suite(const Json& j) {
  if (!j.is_object() || !j.contains("problems") || !j.at("problems").is_array()) {
    throw SteerError(ErrorKind::kSchema, "config key 'problems': expected an array of transfers");
  }
  std::vector<BenchmarkProblem> out;
  for (const auto& entry : j.at("problems")) {
    Json cfg = entry;
    if (!cfg.is_object() || !cfg.contains("id") || !cfg.at("id").is_string()) {
      throw SteerError(ErrorKind::kSchema, "config key 'problems[].id': expected a string");
    }
    if (j.contains("grid_n") && !cfg.contains("grid_n")) cfg["grid_n"] = j.at("grid_n");
    if (!cfg.contains("method")) cfg["method"] = "min_energy";
    BenchmarkProblem p;
    p.id = cfg.at("id").get<std::string>();
    p.base = parse_run_config(cfg);
    out.push_back(std::move(p));
  }
  return out;
}

BenchmarkResult run_benchmark(const std::vector<BenchmarkProblem>& suite, const fs::path& out_dir,
                              unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  BenchmarkResult result;
  const std::size_t n_methods = std::size(kMethods);
  result.rows.resize(suite.size() * n_methods);

  // Problems run concurrently; the three methods of one problem run in order.
  parallel_for(suite.size(), threads, [&](std::size_t i) {
    const BenchmarkProblem& problem = suite[i];
    for (std::size_t m = 0; m < n_methods; ++m) {
      RunConfig cfg = problem.base;
      cfg.method = kMethods[m];
      if (cfg.method == Method::kBaselineFl) cfg.initial_control.reset();
      const fs::path dir = out_dir / problem.id / to_string(cfg.method);
      BenchmarkRow& row = result.rows[i * n_methods + m];
      row.problem = problem.id;
      row.method = cfg.method;
      row.outcome = run_transfer(cfg, dir, 1);
      row.ok = row.outcome.exit_code == 0;
      if (row.outcome.synthesis) {
        const SynthesisReport& r = *row.outcome.synthesis;
        row.energy = r.energy;
        row.sup_norm = r.sup_norm;
        row.terminal_error = r.terminal_error;
        row.iterations = r.iterations;
      }
    }
  });

  for (const auto& row : result.rows) {
    if (!row.ok) {
      result.failures.push_back(row.problem + "/" + to_string(row.method) + ": " + row.outcome.error);
    }
  }

  fs::create_directories(out_dir);
  {
    std::ofstream csv(out_dir / "benchmark.csv");
    csv << "problem,method,energy,sup_norm,terminal_error,iterations\n";
    for (const auto& row : result.rows) {
      csv << row.problem << ',' << to_string(row.method) << ',';
      if (row.outcome.synthesis) {
        csv << format_double(row.energy) << ',' << format_double(row.sup_norm) << ','
            << format_double(row.terminal_error) << ',' << row.iterations << '\n';
      } else {
        csv << ",,," << '\n';
      }
    }
  }
  {
    // Two panels: energy and amplitude per problem, one column per method.
    std::ofstream dat(out_dir / "fig_energy_amplitude.dat");
    dat << "# panel 1: energy (log scale), panel 2: sup-norm amplitude (log scale)\n";
    dat << "# index problem energy_min_energy energy_gramian energy_fl"
           " amp_min_energy amp_gramian amp_fl\n";
    for (std::size_t i = 0; i < suite.size(); ++i) {
      dat << i << ' ' << suite[i].id;
      for (std::size_t m = 0; m < n_methods; ++m) {
        const auto& row = result.rows[i * n_methods + m];
        dat << ' ' << (row.outcome.synthesis ? format_double(row.energy) : "nan");
      }
      for (std::size_t m = 0; m < n_methods; ++m) {
        const auto& row = result.rows[i * n_methods + m];
        dat << ' ' << (row.outcome.synthesis ? format_double(row.sup_norm) : "nan");
      }
      dat << '\n';
    }
  }
  if (!result.failures.empty()) {
    std::ofstream f(out_dir / "failures.txt");
    for (const auto& line : result.failures) f << line << '\n';
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace steer
