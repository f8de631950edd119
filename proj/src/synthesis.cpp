#include "steer/synthesis.hpp"

#include <cmath>
#include <sstream>

namespace steer {

const char* to_string(Method m) {
  switch (m) {
    case Method::kMinEnergy: return "min_energy";
    case Method::kGramian: return "gramian";
    case Method::kBaselineFl: return "fl";
  }
  return "unknown";
}

namespace {

Vector solve_refined(const Matrix& A, const Vector& b) {
  const Eigen::PartialPivLU<Matrix> lu(A);
  Vector x = lu.solve(b);
  x += lu.solve(b - A * x);
  return x;
}

ControlSignal apply_rows(const MatrixField& rows, const Vector& z) {
  std::vector<Vector> values(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) values[j] = rows[j] * z;
  return ControlSignal(rows.grid, std::move(values));
}

SynthesisReport finish_report(Method method, ControlSignal control, Trajectory traj,
                              const Vector& x1) {
  const double terminal_error = (traj.endpoint() - x1).norm();
  const double energy = control.energy();
  const double sup_norm = control.sup_norm();
  return SynthesisReport{.method = method,
                         .control = std::move(control),
                         .trajectory = std::move(traj),
                         .terminal_error = terminal_error,
                         .energy = energy,
                         .sup_norm = sup_norm,
                         .certificate = std::nullopt,
                         .multiplier = Vector(),
                         .iterations = 0,
                         .residuals = {},
                         .feasibility_history = {},
                         .amplitude_history = {},
                         .coercivity_dip = false,
                         .converged = false,
                         .gramians = std::nullopt,
                         .notes = {}};
}

}  // namespace

Linearization linearize(const SystemModel& system, const TransferProblem& problem,
                        const ControlSignal& u, unsigned threads) {
  problem.validate(system);
  if (!(u.grid() == problem.grid)) {
    throw SteerError(ErrorKind::kGrid, "control is not on the problem grid");
  }
  if (u.k() != system.k) {
    throw SteerError(ErrorKind::kSchema, "control has " + std::to_string(u.k()) +
                                             " inputs, model expects " + std::to_string(system.k));
  }
  Trajectory traj = simulate(system, u, problem.x0);
  const FlowJacobianField dphi = flow_jacobian_field(system, traj, problem.anchor, threads);
  const StmField stm = controlled_stm(system, u, traj);
  AdjointRows rows = adjoint_rows(system, traj, stm, dphi);
  GramianSet gs = assemble_gramians(rows);
  return {std::move(traj), std::move(rows), std::move(gs), transfer_target(system, problem)};
}

MapEvaluation apply_map(Method method, Linearization lin, const SynthesisOptions& options,
                        bool strict) {
  GramianSet& gs = lin.gramians;
  if (method == Method::kGramian) {
    const double floor = strict ? options.coercivity_floor : 0.0;
    if (!(gs.lambda_min_N > floor) || condition_number(gs.N) > options.cond_threshold) {
      std::ostringstream msg;
      msg << "almost-optimal Gramian not coercive: lambda_min(N) = " << gs.lambda_min_N
          << " (floor " << options.coercivity_floor << ")";
      throw CoercivityError(msg.str(), gs.lambda_min_N);
    }
    Vector z = solve_refined(gs.N, lin.target);
    ControlSignal out = apply_rows(lin.rows.L_rows, z);
    return {std::move(out), std::move(z), std::move(lin.target), std::move(gs),
            std::move(lin.trajectory)};
  }
  if (method != Method::kMinEnergy) {
    throw SteerError(ErrorKind::kApplicability, "feedback linearization is not a Picard map");
  }
  if (!(gs.cond_G <= options.cond_threshold)) {
    std::ostringstream msg;
    msg << "optimal Gramian ill-conditioned: cond(G) = " << gs.cond_G << ", lambda_min(N) = "
        << gs.lambda_min_N;
    throw SteerError(ErrorKind::kSingularGramian, msg.str());
  }
  Vector z = solve_refined(gs.G, lin.target);
  ControlSignal out = apply_rows(lin.rows.DF_rows, z);
  return {std::move(out), std::move(z), std::move(lin.target), std::move(gs),
          std::move(lin.trajectory)};
}

MapEvaluation evaluate_map(Method method, const SystemModel& system,
                           const TransferProblem& problem, const ControlSignal& u,
                           const SynthesisOptions& options, bool strict) {
  return apply_map(method, linearize(system, problem, u, options.threads), options, strict);
}

ControlSignal evaluate_S(const SystemModel& system, const TransferProblem& problem,
                         const ControlSignal& u, const SynthesisOptions& options) {
  return evaluate_map(Method::kGramian, system, problem, u, options).output;
}

ControlSignal evaluate_Z(const SystemModel& system, const TransferProblem& problem,
                         const ControlSignal& u, const SynthesisOptions& options) {
  return evaluate_map(Method::kMinEnergy, system, problem, u, options).output;
}

SynthesisReport picard_solve(Method method, const SystemModel& system,
                             const TransferProblem& problem, const ControlSignal& u0,
                             const SynthesisOptions& options) {
  std::vector<double> residuals, feasibility, amplitude;
  bool dip = false;

  ControlSignal current = u0;
  std::optional<MapEvaluation> last;
  for (int m = 0; m < options.max_iter + 1; ++m) {
    Linearization lin = linearize(system, problem, current, options.threads);
    const double lam = lin.gramians.lambda_min_N;
    feasibility.push_back(lam);
    amplitude.push_back(current.sup_norm());
    if (!(lam >= options.coercivity_floor)) {
      if (m == 0) {
        std::ostringstream msg;
        msg << "initial control outside the coercivity class: lambda_min(N) = " << lam
            << " < floor " << options.coercivity_floor;
        throw CoercivityError(msg.str(), lam);
      }
      dip = true;
      if (options.abort_on_coercivity_dip) {
        std::ostringstream msg;
        msg << "coercivity dip at iterate " << m << ": lambda_min(N) = " << lam;
        throw CoercivityError(msg.str(), lam);
      }
    }
    MapEvaluation eval = apply_map(method, std::move(lin), options, false);
    const double res = sup_distance(eval.output, current);
    if (!std::isfinite(res)) {
      throw SteerError(ErrorKind::kDivergence, "Picard residual not finite at iterate " + std::to_string(m));
    }
    residuals.push_back(res);

    if (m >= 1 && res < options.tol) {
      Trajectory traj = simulate(system, eval.output, problem.x0);
      SynthesisReport r = finish_report(method, std::move(eval.output), std::move(traj), problem.x1);
      r.multiplier = eval.multiplier;
      r.certificate = eval.multiplier.dot(eval.gramians.M * eval.multiplier);
      r.gramians = std::move(eval.gramians);
      r.iterations = m;
      r.residuals = std::move(residuals);
      r.feasibility_history = std::move(feasibility);
      r.amplitude_history = std::move(amplitude);
      r.amplitude_history.push_back(r.sup_norm);
      r.coercivity_dip = dip;
      r.converged = true;
      if (dip) r.notes.push_back("lambda_min(N) dipped below the coercivity floor during iteration");
      return r;
    }
    current = eval.output;
    last = std::move(eval);
  }

  Trajectory traj = simulate(system, current, problem.x0);
  SynthesisReport r = finish_report(method, current, std::move(traj), problem.x1);
  r.multiplier = last->multiplier;
  r.gramians = last->gramians;
  r.iterations = options.max_iter;
  r.residuals = std::move(residuals);
  r.feasibility_history = std::move(feasibility);
  r.amplitude_history = std::move(amplitude);
  r.coercivity_dip = dip;
  r.converged = false;
  std::ostringstream msg;
  msg << "Picard iteration did not reach tol " << options.tol << " in " << options.max_iter
      << " iterations (last residual " << r.residuals.back() << ")";
  throw NonConvergenceError(msg.str(), std::move(r));
}

double energy_gap(const SynthesisReport& report_Z, const SynthesisReport& report_S) {
  if (report_Z.method != Method::kMinEnergy || report_S.method != Method::kGramian) {
    throw SteerError(ErrorKind::kComparison, "energy_gap expects a min_energy and a gramian report");
  }
  if (!(report_Z.control.grid() == report_S.control.grid()) ||
      (report_Z.trajectory[0] - report_S.trajectory[0]).norm() != 0.0) {
    throw SteerError(ErrorKind::kComparison, "energy_gap: reports solve different problems");
  }
  return report_S.energy - report_Z.energy;
}

// ---------------------------------------------------------------------------
// Feedback-linearization baselines

SynthesisReport baseline_fl_full(const SystemModel& system, const TransferProblem& problem,
                                 double sigma_floor) {
  problem.validate(system);
  if (system.k != system.d) {
    throw SteerError(ErrorKind::kApplicability, "full feedback linearization needs k = d");
  }
  const Vector velocity = (problem.x1 - problem.x0) / problem.grid.horizon();
  const auto feedback = [&](double t, const Vector& x) -> Vector {
    const Matrix B = system.input(t, x);
    const Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(smin >= sigma_floor)) {
      std::ostringstream msg;
      msg << "input matrix near singular at t = " << t << " (sigma_min = " << smin << ")";
      throw SteerError(ErrorKind::kSingularInput, msg.str());
    }
    return svd.solve(velocity - system.drift(t, x));
  };
  ClosedLoopRun run = simulate_feedback(system, feedback, problem.grid, problem.x0);
  return finish_report(Method::kBaselineFl, std::move(run.control), std::move(run.trajectory),
                       problem.x1);
}

double double_integrator_control(double t0, double T, const Eigen::Vector2d& from,
                                 const Eigen::Vector2d& to, double t) {
  const double h = T - t0;
  Eigen::Matrix2d W;
  W << h * h * h / 3.0, h * h / 2.0, h * h / 2.0, h;
  const Eigen::Vector2d drift_image(from[0] + h * from[1], from[1]);
  const Eigen::Vector2d z = W.inverse() * (to - drift_image);
  return (T - t) * z[0] + z[1];
}

SynthesisReport baseline_fl_pendulum(const TransferProblem& problem, const PendulumParams& params) {
  const SystemModel system = make_pendulum(params);
  problem.validate(system);
  const PendulumCoefficients c(params);
  const TimeGrid& g = problem.grid;
  const Eigen::Vector2d from = problem.x0.head<2>();
  const Eigen::Vector2d to = problem.x1.head<2>();
  const auto feedback = [&](double t, const Vector& x) -> Vector {
    const double v = double_integrator_control(g.t0(), g.T(), from, to, t);
    Vector u(1);
    u[0] = (v + c.gamma(t) * x[1] + c.a(t) * std::sin(x[0])) / c.b(t);
    return u;
  };
  ClosedLoopRun run = simulate_feedback(system, feedback, g, problem.x0);
  return finish_report(Method::kBaselineFl, std::move(run.control), std::move(run.trajectory),
                       problem.x1);
}

SynthesisReport baseline_fl_unicycle(const TransferProblem& problem, double speed_floor) {
  const SystemModel system = make_unicycle();
  problem.validate(system);
  const TimeGrid& g = problem.grid;
  const double h = g.horizon();
  const Eigen::Vector2d p0 = problem.x0.head<2>();
  const Eigen::Vector2d p1 = problem.x1.head<2>();
  const double dist = (p1 - p0).norm();
  if (dist == 0.0) {
    throw SteerError(ErrorKind::kSingularInput,
                     "flat output degenerate: coincident endpoint positions give a zero-speed path");
  }
  const double speed = std::max(dist / h, 0.1);
  const Eigen::Vector2d v0 = speed * Eigen::Vector2d(std::cos(problem.x0[2]), std::sin(problem.x0[2]));
  const Eigen::Vector2d v1 = speed * Eigen::Vector2d(std::cos(problem.x1[2]), std::sin(problem.x1[2]));

  // Cubic Hermite p(s), s = (t - t0) / h in [0, 1].
  const auto derivatives = [=](double t) {
    const double s = (t - g.t0()) / h;
    const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
    const double e00 = 12 * s - 6, e10 = 6 * s - 4, e01 = -12 * s + 6, e11 = 6 * s - 2;
    const Eigen::Vector2d pd = (d00 * p0 + d01 * p1) / h + d10 * v0 + d11 * v1;
    const Eigen::Vector2d pdd = (e00 * p0 + e01 * p1) / (h * h) + (e10 * v0 + e11 * v1) / h;
    return std::pair{pd, pdd};
  };
  const auto control = [&](double t) -> Vector {
    const auto [pd, pdd] = derivatives(t);
    const double sp = pd.norm();
    if (!(sp >= speed_floor)) {
      std::ostringstream msg;
      msg << "flat output speed " << sp << " below " << speed_floor << " at t = " << t;
      throw SteerError(ErrorKind::kSingularInput, msg.str());
    }
    Vector u(2);
    u[0] = sp;
    u[1] = (pd[0] * pdd[1] - pd[1] * pdd[0]) / (sp * sp);
    return u;
  };
  // Probe the path densely (nodes and midpoints) before running.
  for (std::size_t j = 0; j + 1 < g.size(); ++j) {
    control(g.node(j));
    control(0.5 * (g.node(j) + g.node(j + 1)));
  }
  ClosedLoopRun run = simulate_feedback(
      system, [&](double t, const Vector&) { return control(t); }, g, problem.x0);
  SynthesisReport r = finish_report(Method::kBaselineFl, std::move(run.control),
                                    std::move(run.trajectory), problem.x1);
  std::ostringstream note;
  note << "flat-output endpoint speed " << speed;
  r.notes.push_back(note.str());
  return r;
}

}  // namespace steer
