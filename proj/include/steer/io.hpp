#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "steer/certify.hpp"
#include "steer/synthesis.hpp"

namespace steer {

inline constexpr const char* kToolkitVersion = "1.0.0";

using Json = nlohmann::json;

/// Builtin model plus its parameter overrides as given in the config.
struct ModelSpec {
  std::string name;
  Json params = Json::object();

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct RunConfig {
  ModelSpec model;
  double t0 = 0.0;
  double T = 1.0;
  int grid_n = 401;
  Anchor anchor = Anchor::kFinal;
  std::vector<double> x0;
  std::vector<double> x1;
  Method method = Method::kMinEnergy;
  double tol = 1e-9;
  int max_iter = 50;
  double coercivity_floor = 1e-6;
  std::string output_dir = ".";
  std::optional<std::vector<double>> initial_control;  // constant warm start
  bool certify = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws kSchema naming the offending key.
RunConfig parse_run_config(const Json& j);
Json to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

/// A builtin system and, for the pendulum, the parameters it was built from.
struct BuiltModel {
  SystemModel system;
  std::optional<PendulumParams> pendulum;
};

/// Names: "pendulum", "rnn3", "unicycle", "linear" (defaults to the double
/// integrator). Throws kSchema for unknown names or malformed parameters.
BuiltModel make_model(const ModelSpec& spec);

TransferProblem make_problem(const RunConfig& config, const SystemModel& system);

/// Default lattice box for the builtin certificates.
SampleBox default_box(const SystemModel& system, double t0, double T);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// CSV with header "t,<prefix>1,...,<prefix>m", one row per grid node.
void write_signal_csv(const std::filesystem::path& path, const VectorField& field,
                      const std::string& prefix);
/// Reads a CSV written by write_signal_csv back into (times, rows).
VectorField read_signal_csv(const std::filesystem::path& path);

Json to_json(const GramianSet& gs);
Json to_json(const Certificate& c);
Json to_json(const SynthesisReport& r);
Json to_json(const SampleBox& box);

/// Result of one transfer: the report JSON written to disk and the process
/// exit status (0 success, 2 schema, 3 non-convergence, 4 coercivity,
/// 5 divergence).
struct RunOutcome {
  int exit_code = 0;
  Json report;
  std::optional<SynthesisReport> synthesis;
  std::string error;
};

int exit_code_for(ErrorKind kind);

/// Executes one transfer and writes report.json, control.csv and
/// trajectory.csv into `out_dir` (created when missing). Never throws for
/// numerical failures; these are encoded in the outcome.
RunOutcome run_transfer(const RunConfig& config, const std::filesystem::path& out_dir,
                        unsigned threads = 1);

/// Certificates applicable to the configured model, along the given control
/// (zero when absent) for the STM audit.
std::vector<Certificate> certify_model(const BuiltModel& model, const RunConfig& config,
                                       const std::optional<SampleBox>& box,
                                       const ControlSignal* control = nullptr);

}  // namespace steer
