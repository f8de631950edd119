#include "steer/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "steer/parallel.hpp"

namespace steer {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void schema_error(const std::string& key, const std::string& why) {
  throw SteerError(ErrorKind::kSchema, "config key '" + key + "': " + why);
}

const Json& required(const Json& j, const std::string& key, const std::string& label = {}) {
  if (!j.contains(key)) schema_error(label.empty() ? key : label, "missing required key");
  return j.at(key);
}

double as_number(const Json& v, const std::string& key) {
  if (!v.is_number()) schema_error(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) schema_error(key, "must be finite");
  return x;
}

int as_int(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) schema_error(key, "expected an integer");
  return v.get<int>();
}

std::vector<double> as_vector(const Json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) schema_error(key, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_number(e, key));
  return out;
}

Matrix as_matrix(const Json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) schema_error(key, "expected a nested array");
  const auto rows = v.size();
  const auto cols = as_vector(v[0], key).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = as_vector(v[i], key);
    if (row.size() != cols) schema_error(key, "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = row[c];
  }
  return m;
}

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// Non-finite values serialize as null.
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Method parse_method(const std::string& s) {
  if (s == "min_energy") return Method::kMinEnergy;
  if (s == "gramian") return Method::kGramian;
  if (s == "fl") return Method::kBaselineFl;
  schema_error("method", "expected one of min_energy, gramian, fl");
}

void check_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where) {
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      schema_error(where.empty() ? k : where + "." + k, "unknown key");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

RunConfig parse_run_config(const Json& j) {
  if (!j.is_object()) throw SteerError(ErrorKind::kSchema, "config must be a JSON object");
  check_keys(j,
             {"model", "t0", "T", "grid_n", "anchor", "x0", "x1", "method", "tol", "max_iter",
              "coercivity_floor", "output_dir", "initial_control", "certify", "id"},
             "");
  RunConfig c;
  const Json& model = required(j, "model");
  if (model.is_string()) {
    c.model.name = model.get<std::string>();
  } else if (model.is_object()) {
    check_keys(model, {"name", "params"}, "model");
    const Json& name = required(model, "name", "model.name");
    if (!name.is_string()) schema_error("model.name", "expected a string");
    c.model.name = name.get<std::string>();
    if (model.contains("params")) {
      if (!model.at("params").is_object()) schema_error("model.params", "expected an object");
      c.model.params = model.at("params");
    }
  } else {
    schema_error("model", "expected a name or {name, params}");
  }

  c.t0 = as_number(required(j, "t0"), "t0");
  c.T = as_number(required(j, "T"), "T");
  if (!(c.T > c.t0)) schema_error("T", "must exceed t0");
  if (j.contains("grid_n")) c.grid_n = as_int(j.at("grid_n"), "grid_n");
  if (c.grid_n < 3 || c.grid_n % 2 == 0) schema_error("grid_n", "must be odd and at least 3");
  if (j.contains("anchor")) {
    const Json& a = j.at("anchor");
    if (a == "T") {
      c.anchor = Anchor::kFinal;
    } else if (a == "t0") {
      c.anchor = Anchor::kInitial;
    } else {
      schema_error("anchor", "expected \"t0\" or \"T\"");
    }
  }
  c.x0 = as_vector(required(j, "x0"), "x0");
  c.x1 = as_vector(required(j, "x1"), "x1");
  const Json& method = required(j, "method");
  if (!method.is_string()) schema_error("method", "expected a string");
  c.method = parse_method(method.get<std::string>());
  if (j.contains("tol")) c.tol = as_number(j.at("tol"), "tol");
  if (!(c.tol > 0.0)) schema_error("tol", "must be positive");
  if (j.contains("max_iter")) c.max_iter = as_int(j.at("max_iter"), "max_iter");
  if (c.max_iter < 1) schema_error("max_iter", "must be at least 1");
  if (j.contains("coercivity_floor")) {
    c.coercivity_floor = as_number(j.at("coercivity_floor"), "coercivity_floor");
  }
  if (!(c.coercivity_floor > 0.0)) schema_error("coercivity_floor", "must be positive");
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) schema_error("output_dir", "expected a string");
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("initial_control")) {
    c.initial_control = as_vector(j.at("initial_control"), "initial_control");
  }
  if (j.contains("certify")) {
    if (!j.at("certify").is_boolean()) schema_error("certify", "expected a boolean");
    c.certify = j.at("certify").get<bool>();
  }
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["model"] = {{"name", c.model.name}, {"params", c.model.params}};
  j["t0"] = c.t0;
  j["T"] = c.T;
  j["grid_n"] = c.grid_n;
  j["anchor"] = c.anchor == Anchor::kFinal ? "T" : "t0";
  j["x0"] = c.x0;
  j["x1"] = c.x1;
  j["method"] = to_string(c.method);
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["coercivity_floor"] = c.coercivity_floor;
  j["output_dir"] = c.output_dir;
  if (c.initial_control) j["initial_control"] = *c.initial_control;
  j["certify"] = c.certify;
  return j;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SteerError(ErrorKind::kSchema, "cannot open config " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw SteerError(ErrorKind::kSchema, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Models

BuiltModel make_model(const ModelSpec& spec) {
  const Json& p = spec.params;
  if (spec.name == "pendulum") {
    check_keys(p, {"g", "l0", "l1", "m", "nu", "omega", "beta"}, "model.params");
    PendulumParams pp;
    const auto get = [&](const char* key, double& field) {
      if (p.contains(key)) field = as_number(p.at(key), std::string("model.params.") + key);
    };
    get("g", pp.g);
    get("l0", pp.l0);
    get("l1", pp.l1);
    get("m", pp.m);
    get("nu", pp.nu);
    get("omega", pp.omega);
    get("beta", pp.beta);
    return {make_pendulum(pp), pp};
  }
  if (spec.name == "rnn3") {
    check_keys(p, {"D", "W"}, "model.params");
    RnnParams rp;
    if (p.contains("D")) {
      const auto d = as_vector(p.at("D"), "model.params.D");
      if (d.size() != 3) schema_error("model.params.D", "expected 3 diagonal entries");
      rp.decay = Eigen::Vector3d(d[0], d[1], d[2]);
    }
    if (p.contains("W")) {
      const Matrix w = as_matrix(p.at("W"), "model.params.W");
      if (w.rows() != 3 || w.cols() != 3) schema_error("model.params.W", "expected 3x3");
      rp.weights = w;
    }
    return {make_rnn(rp), std::nullopt};
  }
  if (spec.name == "unicycle") {
    check_keys(p, {}, "model.params");
    return {make_unicycle(), std::nullopt};
  }
  if (spec.name == "linear") {
    check_keys(p, {"A", "B"}, "model.params");
    if (!p.contains("A") && !p.contains("B")) return {make_double_integrator(), std::nullopt};
    const Matrix A = as_matrix(required(p, "A", "model.params.A"), "model.params.A");
    const Matrix B = as_matrix(required(p, "B", "model.params.B"), "model.params.B");
    try {
      return {make_linear(A, B), std::nullopt};
    } catch (const SteerError& e) {
      schema_error("model.params", e.what());
    }
  }
  schema_error("model.name", "unknown model '" + spec.name +
                                 "' (expected pendulum, rnn3, unicycle or linear)");
}

TransferProblem make_problem(const RunConfig& config, const SystemModel& system) {
  TransferProblem p{to_eigen(config.x0), to_eigen(config.x1),
                    TimeGrid(config.t0, config.T, static_cast<std::size_t>(config.grid_n)),
                    config.anchor};
  p.validate(system);
  return p;
}

SampleBox default_box(const SystemModel& system, double t0, double T) {
  SampleBox box;
  box.t0 = t0;
  box.T = T;
  box.lower = Vector::Constant(system.d, -1.0);
  box.upper = Vector::Constant(system.d, 1.0);
  if (system.name == "pendulum") {
    box.lower << -std::numbers::pi, -5.0;
    box.upper << std::numbers::pi, 5.0;
  } else if (system.name == "rnn3") {
    box.lower.setConstant(-3.0);
    box.upper.setConstant(3.0);
  } else if (system.name == "unicycle") {
    box.lower << -2.0, -2.0, -std::numbers::pi;
    box.upper << 2.0, 2.0, std::numbers::pi;
  }
  return box;
}

// ---------------------------------------------------------------------------
// Serialization

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_signal_csv(const fs::path& path, const VectorField& field, const std::string& prefix) {
  std::ofstream out(path);
  if (!out) throw SteerError(ErrorKind::kSchema, "cannot write " + path.string());
  out << "t";
  const auto m = field.values.front().size();
  for (Eigen::Index i = 0; i < m; ++i) out << ',' << prefix << i + 1;
  out << '\n';
  for (std::size_t j = 0; j < field.size(); ++j) {
    out << format_double(field.grid.node(j));
    for (Eigen::Index i = 0; i < m; ++i) out << ',' << format_double(field[j][i]);
    out << '\n';
  }
}

VectorField read_signal_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SteerError(ErrorKind::kSchema, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<double> times;
  std::vector<Vector> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto comma = std::min(line.find(',', pos), line.size());
      double v = 0.0;
      const auto res = std::from_chars(line.data() + pos, line.data() + comma, v);
      if (res.ec != std::errc()) throw SteerError(ErrorKind::kSchema, "bad number in " + path.string());
      cells.push_back(v);
      pos = comma + 1;
    }
    times.push_back(cells.front());
    rows.push_back(Eigen::Map<const Vector>(cells.data() + 1, static_cast<Eigen::Index>(cells.size() - 1)));
  }
  if (times.size() < 3) throw SteerError(ErrorKind::kSchema, "signal file too short: " + path.string());
  return VectorField(TimeGrid(times.front(), times.back(), times.size()), std::move(rows));
}

Json to_json(const GramianSet& gs) {
  return {{"M", matrix_json(gs.M)},
          {"N", matrix_json(gs.N)},
          {"G", matrix_json(gs.G)},
          {"lambda_min_N", finite_or_null(gs.lambda_min_N)},
          {"lambda_min_M", finite_or_null(gs.lambda_min_M)},
          {"cond_G", finite_or_null(gs.cond_G)}};
}

Json to_json(const Certificate& c) {
  return {{"kind", to_string(c.kind)},
          {"value", finite_or_null(c.value)},
          {"threshold", c.threshold},
          {"margin", finite_or_null(c.margin)},
          {"passed", c.passed},
          {"arg_t", c.arg_t},
          {"arg_x", vector_json(c.arg_x)},
          {"sampled_lipschitz", finite_or_null(c.sampled_lipschitz)},
          {"note", c.note}};
}

Json to_json(const SampleBox& box) {
  return {{"t0", box.t0},
          {"T", box.T},
          {"n_t", box.n_t},
          {"lower", vector_json(box.lower)},
          {"upper", vector_json(box.upper)},
          {"n_x", box.n_x}};
}

Json to_json(const SynthesisReport& r) {
  Json j{{"method", to_string(r.method)},
         {"converged", r.converged},
         {"terminal_error", r.terminal_error},
         {"energy", r.energy},
         {"sup_norm", r.sup_norm},
         {"certificate", r.certificate ? Json(*r.certificate) : Json(nullptr)},
         {"multiplier", vector_json(r.multiplier)},
         {"iterations", r.iterations},
         {"residuals", r.residuals},
         {"feasibility_history", r.feasibility_history},
         {"amplitude_history", r.amplitude_history},
         {"coercivity_dip", r.coercivity_dip},
         {"notes", r.notes}};
  return j;
}

// ---------------------------------------------------------------------------
// Runs

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSchema:
    case ErrorKind::kModel:
    case ErrorKind::kApplicability:
    case ErrorKind::kGrid:
      return 2;
    case ErrorKind::kNonConvergence:
      return 3;
    case ErrorKind::kCoercivity:
    case ErrorKind::kSingularGramian:
    case ErrorKind::kSingularInput:
      return 4;
    case ErrorKind::kDivergence:
      return 5;
    case ErrorKind::kComparison:
      return 1;
  }
  return 1;
}

std::vector<Certificate> certify_model(const BuiltModel& model, const RunConfig& config,
                                       const std::optional<SampleBox>& box,
                                       const ControlSignal* control) {
  const SystemModel& sys = model.system;
  const SampleBox lattice = box ? *box : default_box(sys, config.t0, config.T);
  std::vector<Certificate> out;
  if (sys.d == 2 && sys.k == 1 && sys.input_state_independent && sys.input_time_derivative) {
    out.push_back(bracket_infimum(sys, lattice));
  }
  if (sys.k == sys.d && sys.bounds) {
    out.push_back(fully_actuated_floor(sys, lattice, sys.bounds->lambda1));
  }
  if (sys.bounds) {
    const TransferProblem problem = make_problem(config, sys);
    const ControlSignal u = control ? *control : ControlSignal::zero(problem.grid, sys.k);
    const Trajectory traj = simulate(sys, u, problem.x0);
    out.push_back(stm_bound_audit(sys, u, traj, controlled_stm(sys, u, traj), sys.bounds));
  }
  return out;
}

namespace {

std::vector<std::string> assumptions_for(const BuiltModel& model) {
  std::vector<std::string> out;
  if (model.pendulum) {
    std::ostringstream s;
    s << "pendulum damping beta = " << model.pendulum->beta
      << " in gamma(t); the parameter list names nu = " << model.pendulum->nu;
    out.push_back(s.str());
  }
  return out;
}

}  // namespace

RunOutcome run_transfer(const RunConfig& config, const fs::path& out_dir, unsigned threads) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  RunOutcome outcome;
  Json& report = outcome.report;
  report["toolkit"] = {{"name", "steer"}, {"version", kToolkitVersion}};
  report["config"] = to_json(config);

  const auto write_report = [&] {
    report["timings"] = {
        {"total_s", std::chrono::duration<double>(Clock::now() - start).count()}};
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "report.json") << report.dump(2) << '\n';
  };

  try {
    const BuiltModel model = make_model(config.model);
    const SystemModel& sys = model.system;
    report["assumptions"] = assumptions_for(model);
    const TransferProblem problem = make_problem(config, sys);

    SynthesisOptions options;
    options.tol = config.tol;
    options.max_iter = config.max_iter;
    options.coercivity_floor = config.coercivity_floor;
    options.threads = threads;

    const auto synth_start = Clock::now();
    SynthesisReport result = [&] {
      if (config.method == Method::kBaselineFl) {
        if (model.pendulum) return baseline_fl_pendulum(problem, *model.pendulum);
        if (sys.name == "unicycle") return baseline_fl_unicycle(problem);
        if (sys.k == sys.d) return baseline_fl_full(sys, problem);
        throw SteerError(ErrorKind::kApplicability,
                         "no feedback-linearization baseline for model '" + sys.name + "'");
      }
      ControlSignal u0 = ControlSignal::zero(problem.grid, sys.k);
      if (config.initial_control) {
        if (static_cast<int>(config.initial_control->size()) != sys.k) {
          schema_error("initial_control", "expected " + std::to_string(sys.k) + " entries");
        }
        u0 = ControlSignal::constant(problem.grid, to_eigen(*config.initial_control));
      }
      return picard_solve(config.method, sys, problem, u0, options);
    }();
    const double synth_seconds = std::chrono::duration<double>(Clock::now() - synth_start).count();

    if (!result.gramians) {
      try {
        result.gramians = linearize(sys, problem, result.control, threads).gramians;
      } catch (const SteerError& e) {
        result.notes.push_back(std::string("Gramians unavailable at the baseline control: ") + e.what());
      }
    }

    report["status"] = "converged";
    report["synthesis"] = to_json(result);
    if (result.gramians) report["gramians"] = to_json(*result.gramians);
    if (config.certify) {
      const SampleBox box = default_box(sys, config.t0, config.T);
      Json certs = Json::array();
      for (const auto& c : certify_model(model, config, box, &result.control)) {
        certs.push_back(to_json(c));
      }
      report["certificates"] = certs;
      report["certificate_box"] = to_json(box);
    }
    fs::create_directories(out_dir);
    write_signal_csv(out_dir / "control.csv", result.control.samples(), "u");
    write_signal_csv(out_dir / "trajectory.csv", result.trajectory.states, "x");
    report["timings_synthesis_s"] = synth_seconds;
    outcome.synthesis = std::move(result);
    outcome.exit_code = 0;
  } catch (const NonConvergenceError& e) {
    report["status"] = "non_convergence";
    report["error"] = e.what();
    report["synthesis"] = to_json(e.report());
    outcome.synthesis = e.report();
    outcome.error = e.what();
    outcome.exit_code = exit_code_for(e.kind());
  } catch (const CoercivityError& e) {
    report["status"] = to_string(e.kind());
    report["error"] = e.what();
    report["lambda_min_N"] = finite_or_null(e.lambda_min());
    outcome.error = e.what();
    outcome.exit_code = exit_code_for(e.kind());
  } catch (const SteerError& e) {
    report["status"] = to_string(e.kind());
    report["error"] = e.what();
    outcome.error = e.what();
    outcome.exit_code = exit_code_for(e.kind());
  }
  write_report();
  return outcome;
}

}  // namespace steer
