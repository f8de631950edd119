#include "steer/gramian.hpp"

#include <cmath>
#include <complex>
#include <limits>

namespace steer {

double lambda_min_symmetric(const Matrix& S) {
  const Matrix sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double condition_number(const Matrix& A) {
  const Eigen::VectorXd sv = A.jacobiSvd().singularValues();
  const double smallest = sv(sv.size() - 1);
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

void refresh_diagnostics(GramianSet& gs) {
  gs.lambda_min_N = lambda_min_symmetric(gs.N);
  gs.lambda_min_M = lambda_min_symmetric(gs.M);
  gs.cond_G = condition_number(gs.G);
}

GramianSet assemble_gramians(const AdjointRows& rows) {
  const TimeGrid& grid = rows.grid();
  const std::vector<double> w = simpson_weights(grid);
  const auto d = rows.L_rows[0].cols();
  GramianSet gs{Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d)};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Matrix& L = rows.L_rows[j];
    const Matrix& DF = rows.DF_rows[j];
    if (!L.allFinite() || !DF.allFinite()) {
      throw SteerError(ErrorKind::kDivergence, "non-finite adjoint row at node " + std::to_string(j));
    }
    gs.M.noalias() += w[j] * DF.transpose() * DF;
    gs.N.noalias() += w[j] * L.transpose() * L;
    gs.G.noalias() += w[j] * L.transpose() * DF;
  }
  // Symmetric by construction; remove roundoff asymmetry.
  gs.M = 0.5 * (gs.M + gs.M.transpose()).eval();
  gs.N = 0.5 * (gs.N + gs.N.transpose()).eval();
  refresh_diagnostics(gs);
  return gs;
}

UnicycleGramians unicycle_closed_form(const ControlSignal& omega, const Trajectory& traj) {
  const TimeGrid& grid = traj.grid();
  if (!(grid == omega.grid()) || omega.k() != 1 || traj[0].size() != 3) {
    throw SteerError(ErrorKind::kSchema, "unicycle_closed_form: needs scalar omega and 3-state run");
  }
  const std::size_t n = grid.size();
  const double horizon = grid.horizon();
  const Vector& xT = traj.endpoint();

  std::vector<Matrix> ggt(n);
  std::vector<Vector> dp(n);
  std::vector<double> re(n), im(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double th = traj[j][2];
    Eigen::Vector2d g(std::cos(th), std::sin(th));
    ggt[j] = g * g.transpose();
    dp[j] = Eigen::Vector2d(traj[j][1] - xT[1], xT[0] - traj[j][0]);
    const std::complex<double> e = std::exp(std::complex<double>(0.0, 2.0 * (th - traj[0][2])));
    re[j] = e.real();
    im[j] = e.imag();
  }

  UnicycleGramians out;
  out.G_omega = composite_quadrature(MatrixField(grid, ggt));
  out.delta_p = composite_quadrature(VectorField(grid, dp));
  const double modulus = std::hypot(composite_quadrature(grid, re), composite_quadrature(grid, im));
  out.lambda_min_formula = 0.5 * (horizon - modulus);
  out.lambda_min_eigen = lambda_min_symmetric(out.G_omega);

  GramianSet& gs = out.gramians;
  gs.N = Matrix::Zero(3, 3);
  gs.N.topLeftCorner(2, 2) = out.G_omega;
  gs.N(2, 2) = horizon;
  gs.G = gs.N;
  gs.G.block(2, 0, 1, 2) = out.delta_p.transpose();

  // R_u(T, t) = Id + e_theta-column (-(p2(T) - p2(t)), p1(T) - p1(t), 0).
  std::vector<Matrix> m(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double th = traj[j][2];
    Matrix R = Matrix::Identity(3, 3);
    R(0, 2) = -(xT[1] - traj[j][1]);
    R(1, 2) = xT[0] - traj[j][0];
    Matrix B = Matrix::Zero(3, 2);
    B(0, 0) = std::cos(th);
    B(1, 0) = std::sin(th);
    B(2, 1) = 1.0;
    const Matrix RB = R * B;
    m[j] = RB * RB.transpose();
  }
  gs.M = composite_quadrature(MatrixField(grid, m));
  refresh_diagnostics(gs);
  return out;
}

CoercivityVerdict coercivity_check(const GramianSet& gs, double floor) {
  CoercivityVerdict v;
  v.lambda_min_N = gs.lambda_min_N;
  v.lambda_min_M = gs.lambda_min_M;
  v.margin = gs.lambda_min_N - floor;
  v.feasible = floor > 0.0 && v.margin >= 0.0;
  return v;
}

namespace {

struct Gaps {
  double lower;
  double upper;
};

// lambda_min(Y - c X) and lambda_min(c^-1 X - Y).
Gaps sandwich_gaps(const Matrix& X, const Matrix& Y, double c) {
  return {lambda_min_symmetric(Y - c * X), lambda_min_symmetric(X / c - Y)};
}

bool gaps_hold(const Gaps& g) { return g.lower >= -kPsdTolerance && g.upper >= -kPsdTolerance; }

}  // namespace

SandwichReport sandwich(const Matrix& X, const Matrix& Y, double c) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols() || X.rows() != X.cols()) {
    throw SteerError(ErrorKind::kSchema, "loewner audit: dimension mismatch");
  }
  if (!(c > 0.0 && c <= 1.0)) {
    throw SteerError(ErrorKind::kSchema, "loewner audit: constant must lie in (0, 1]");
  }
  SandwichReport r;
  const Gaps g = sandwich_gaps(X, Y, c);
  r.lower = g.lower;
  r.upper = g.upper;
  r.holds = gaps_hold(g);

  // Both gaps are monotone in c: bisect on (0, 1].
  if (gaps_hold(sandwich_gaps(X, Y, 1.0))) {
    r.best = 1.0;
    return r;
  }
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (gaps_hold(sandwich_gaps(X, Y, mid))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  r.best = lo;
  return r;
}

LoewnerAudit loewner_audit(const GramianSet& at_initial, const GramianSet& at_final,
                           double alpha, double gamma) {
  LoewnerAudit a;
  a.alpha_initial = sandwich(at_initial.M, at_initial.N, alpha);
  a.alpha_final = sandwich(at_final.M, at_final.N, alpha);
  a.gamma = sandwich(at_final.N, at_initial.N, gamma);
  return a;
}

}  // namespace steer
