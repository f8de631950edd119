#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "steer/io.hpp"

namespace steer {

/// One transfer of the suite; `base.method` is overwritten per method.
struct BenchmarkProblem {
  std::string id;
  RunConfig base;
};

struct BenchmarkRow {
  std::string problem;
  Method method = Method::kMinEnergy;
  bool ok = false;
  double energy = 0.0;
  double sup_norm = 0.0;
  double terminal_error = 0.0;
  int iterations = 0;
  RunOutcome outcome;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<std::string> failures;
  double wall_seconds = 0.0;
  int exit_code() const { return failures.empty() ? 0 : 1; }
};

/// The six shipped transfers: two pendulum, two RNN, two unicycle.
std::vector<BenchmarkProblem> default_suite(int grid_n = 401);

/// Suite file: {"grid_n": 401, "problems": [{"id": "P1", ...run config...}]}.
std::vector<BenchmarkProblem> parse_suite(const Json& j);

/// Runs every problem with min_energy, gramian and fl. Problems execute on
/// up to `threads` workers, each writing to out_dir/<id>/<method>/. Emits
/// benchmark.csv and fig_energy_amplitude.dat in out_dir.
BenchmarkResult run_benchmark(const std::vector<BenchmarkProblem>& suite,
                              const std::filesystem::path& out_dir, unsigned threads);

}  // namespace steer
