#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "steer/gramian.hpp"
#include "steer/system.hpp"

namespace steer {

enum class Method { kMinEnergy, kGramian, kBaselineFl };

const char* to_string(Method m);

struct SynthesisOptions {
  double tol = 1e-9;                 // sup-norm Picard residual
  int max_iter = 50;
  double coercivity_floor = 1e-6;    // lower bound on lambda_min(N)
  double cond_threshold = 1e12;      // largest accepted cond(G)
  bool abort_on_coercivity_dip = false;
  unsigned threads = 1;              // workers for the per-node flow Jacobian solves
};

/// Everything one evaluation of a synthesis map produces at control u.
struct MapEvaluation {
  ControlSignal output;   // S(u) or Z(u)
  Vector multiplier;      // N^-1 y or G^-1 y
  Vector target;          // y_tau
  GramianSet gramians;
  Trajectory trajectory;  // x_u
};

/// Trajectory, adjoint rows, Gramians and target at one control.
struct Linearization {
  Trajectory trajectory;
  AdjointRows rows;
  GramianSet gramians;
  Vector target;  // y_tau
};

Linearization linearize(const SystemModel& system, const TransferProblem& problem,
                        const ControlSignal& u, unsigned threads = 1);

/// Applies S (kGramian) or Z (kMinEnergy) to a precomputed linearization.
MapEvaluation apply_map(Method method, Linearization lin, const SynthesisOptions& options,
                        bool strict = true);

/// Gramian-like map S(u) = L*_{u,tau} N(u)^-1 y.
/// Throws CoercivityError when lambda_min(N(u)) <= floor.
ControlSignal evaluate_S(const SystemModel& system, const TransferProblem& problem,
                         const ControlSignal& u, const SynthesisOptions& options = {});

/// Lagrange multiplier map Z(u) = DF(u)* G(u)^-1 y.
/// Throws kSingularGramian when cond(G(u)) exceeds the threshold.
ControlSignal evaluate_Z(const SystemModel& system, const TransferProblem& problem,
                         const ControlSignal& u, const SynthesisOptions& options = {});

/// Full evaluation of either map. With `strict`, the S map enforces the
/// coercivity floor; otherwise only invertibility is required.
MapEvaluation evaluate_map(Method method, const SystemModel& system,
                           const TransferProblem& problem, const ControlSignal& u,
                           const SynthesisOptions& options, bool strict = true);

struct SynthesisReport {
  Method method = Method::kMinEnergy;
  ControlSignal control;
  Trajectory trajectory;
  double terminal_error = 0.0;   // |x_u(T) - x1|
  double energy = 0.0;           // 0.5 |u|_L2^2
  double sup_norm = 0.0;
  std::optional<double> certificate;  // z^T M z (Gramian methods only)
  Vector multiplier;
  int iterations = 0;
  std::vector<double> residuals;            // |u^(m+1) - u^(m)|_inf
  std::vector<double> feasibility_history;  // lambda_min(N(u^(m)))
  std::vector<double> amplitude_history;    // |u^(m)|_inf
  bool coercivity_dip = false;
  bool converged = false;
  std::optional<GramianSet> gramians;       // at the accepted iterate
  std::vector<std::string> notes;
};

/// Thrown when Picard exhausts max_iter; carries the partial report.
class NonConvergenceError : public SteerError {
 public:
  NonConvergenceError(const std::string& what, SynthesisReport report)
      : SteerError(ErrorKind::kNonConvergence, what),
        report_(std::make_shared<SynthesisReport>(std::move(report))) {}

  const SynthesisReport& report() const { return *report_; }

 private:
  std::shared_ptr<const SynthesisReport> report_;
};

/// Picard iteration u^(m+1) = map(u^(m)) from u0.
///
/// The iterate u^(m) (m >= 1) is accepted once |map(u^(m)) - u^(m)|_inf < tol;
/// the report then carries map(u^(m)) together with the multiplier and
/// Gramians of that final evaluation, so the energy identity holds to
/// roundoff. `iterations` is m. The starting control must lie in the
/// coercivity class; later dips below the floor are flagged (or abort when
/// configured).
SynthesisReport picard_solve(Method method, const SystemModel& system,
                             const TransferProblem& problem, const ControlSignal& u0,
                             const SynthesisOptions& options = {});

/// energy(S report) - energy(Z report). Throws kComparison if the reports
/// are not on the same problem grid or not Gramian-method reports.
double energy_gap(const SynthesisReport& report_Z, const SynthesisReport& report_S);

/// u = B^-1 ((x1 - x0) / (T - t0) - N_t(x)) in closed loop (k = d).
SynthesisReport baseline_fl_full(const SystemModel& system, const TransferProblem& problem,
                                 double sigma_floor = 1e-10);

/// u = (v + gamma x2 + a sin x1) / b with v the double-integrator
/// minimum-energy control.
SynthesisReport baseline_fl_pendulum(const TransferProblem& problem, const PendulumParams& params);

/// Flat-output steering along a cubic Hermite path in the plane. Endpoint
/// speeds are max(|p1 - p0| / (T - t0), 0.1) along the prescribed headings.
SynthesisReport baseline_fl_unicycle(const TransferProblem& problem, double speed_floor = 1e-6);

/// Classical minimum-energy control of the double integrator q'' = v from
/// (q0, q0') at t0 to (q1, q1') at T, evaluated at t.
double double_integrator_control(double t0, double T, const Eigen::Vector2d& from,
                                 const Eigen::Vector2d& to, double t);

}  // namespace steer
