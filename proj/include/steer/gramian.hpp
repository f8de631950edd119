#pragma once

#include "steer/flow.hpp"

namespace steer {

/// The empirical (M), almost-optimal (N) and optimal (G) Gramians at one
/// control, with eigenvalue diagnostics.
struct GramianSet {
  Matrix M;
  Matrix N;
  Matrix G;
  double lambda_min_N = 0.0;
  double lambda_min_M = 0.0;
  double cond_G = 0.0;
};

/// Eigenvalue slack accepted when calling a symmetric matrix PSD.
inline constexpr double kPsdTolerance = 1e-10;

double lambda_min_symmetric(const Matrix& S);
/// Ratio of extreme singular values; +inf for a singular matrix.
double condition_number(const Matrix& A);

/// Recomputes the diagnostic fields from M, N, G.
void refresh_diagnostics(GramianSet& gs);

/// M = int DF^T DF, N = int L^T L, G = int L^T DF over the row fields
/// (Simpson). Throws kDivergence on non-finite rows.
GramianSet assemble_gramians(const AdjointRows& rows);

/// Closed forms for the unicycle.
struct UnicycleGramians {
  Matrix G_omega;          // int g g^T, g = (cos theta, sin theta)
  Vector delta_p;          // int (p2(t) - p2(T), p1(T) - p1(t)) dt
  double lambda_min_formula = 0.0;  // (T - |int exp(2 i (theta - theta0))|) / 2
  double lambda_min_eigen = 0.0;    // smallest eigenvalue of G_omega
  GramianSet gramians;     // N, G from the block forms and M from the explicit STM
};

/// `omega` is the angular-rate signal (k = 1); `traj` the unicycle run it
/// drives. Throws kSchema for mismatched inputs.
UnicycleGramians unicycle_closed_form(const ControlSignal& omega, const Trajectory& traj);

struct CoercivityVerdict {
  bool feasible = false;
  double margin = 0.0;  // lambda_min(N) - floor
  double lambda_min_N = 0.0;
  double lambda_min_M = 0.0;
};

CoercivityVerdict coercivity_check(const GramianSet& gs, double floor);

/// Loewner sandwich checks:
///   alpha M <= N <= alpha^-1 M          (per anchor)
///   gamma N_T <= N_t0 <= gamma^-1 N_T   (across anchors)
struct SandwichReport {
  double lower = 0.0;   // lambda_min of the lower gap
  double upper = 0.0;   // lambda_min of the upper gap
  bool holds = false;
  double best = 0.0;    // largest admissible constant in (0, 1]
};

struct LoewnerAudit {
  SandwichReport alpha_initial;  // M vs N at tau = t0
  SandwichReport alpha_final;    // M vs N at tau = T
  SandwichReport gamma;          // N_t0 vs N_T
};

/// Checks c X <= Y <= c^-1 X and reports the largest admissible constant,
/// found by bisection. Throws kSchema on dimension mismatch or c outside (0, 1].
SandwichReport sandwich(const Matrix& X, const Matrix& Y, double c);

LoewnerAudit loewner_audit(const GramianSet& at_initial, const GramianSet& at_final,
                           double alpha, double gamma);

}  // namespace steer
