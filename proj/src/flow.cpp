#include "steer/flow.hpp"

#include <cmath>
#include <string>

#include "steer/parallel.hpp"

namespace steer {

namespace {

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (!(a == b)) throw SteerError(ErrorKind::kGrid, std::string(what) + ": grids differ");
}

std::size_t anchor_index(const TimeGrid& grid, Anchor anchor) {
  return anchor == Anchor::kInitial ? 0 : grid.size() - 1;
}

// Packs (x, Y) as [x; vec(Y)] for joint integration with the variational equation.
OdeRhs variational_rhs(const SystemModel& system) {
  const int d = system.d;
  return [&system, d](double t, const Vector& z) -> Vector {
    const Vector x = z.head(d);
    const Eigen::Map<const Matrix> Y(z.data() + d, d, d);
    Vector out(d + d * d);
    out.head(d) = system.drift(t, x);
    Eigen::Map<Matrix>(out.data() + d, d, d) = system.drift_jacobian(t, x) * Y;
    return out;
  };
}

Vector pack(const Vector& x, const Matrix& Y) {
  const auto d = x.size();
  Vector z(d + d * d);
  z.head(d) = x;
  Eigen::Map<Matrix>(z.data() + d, d, d) = Y;
  return z;
}

Matrix controlled_jacobian(const SystemModel& system, double t, const Vector& x, const Vector& u) {
  Matrix A = system.drift_jacobian(t, x);
  const auto slices = system.input_jacobian(t, x);
  for (int j = 0; j < system.k; ++j) {
    if (u[j] != 0.0) A += u[j] * slices[j];
  }
  return A;
}

}  // namespace

Vector flow_map(const SystemModel& system, double s, double t, const Vector& x,
                std::size_t steps) {
  const OdeRhs rhs = [&system](double r, const Vector& y) { return system.drift(r, y); };
  return integrate_between(rhs, s, t, x, steps);
}

Matrix flow_jacobian(const SystemModel& system, double s, double t, const Vector& x,
                     std::size_t steps) {
  const int d = system.d;
  const Vector z = integrate_between(variational_rhs(system), s, t,
                                     pack(x, Matrix::Identity(d, d)), steps);
  return Eigen::Map<const Matrix>(z.data() + d, d, d);
}

StmField controlled_stm(const SystemModel& system, const ControlSignal& u, const Trajectory& traj) {
  const TimeGrid& grid = traj.grid();
  require_same_grid(grid, u.grid(), "controlled_stm");
  const std::size_t n = grid.size();
  const int d = system.d;

  // Node velocities for Hermite midpoints.
  std::vector<Vector> f(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = grid.node(j);
    f[j] = system.drift(t, traj[j]) + system.input(t, traj[j]) * u[j];
  }

  std::vector<Matrix> R(n);
  R[n - 1] = Matrix::Identity(d, d);
  for (std::size_t j = n - 1; j > 0; --j) {
    const double t_hi = grid.node(j);
    const double t_lo = grid.node(j - 1);
    const double h = t_lo - t_hi;  // negative
    const double t_mid = 0.5 * (t_hi + t_lo);
    const Vector x_mid = 0.5 * (traj[j] + traj[j - 1]) + (-h / 8.0) * (f[j - 1] - f[j]);

    const Matrix A_hi = controlled_jacobian(system, t_hi, traj[j], u[j]);
    const Matrix A_mid = controlled_jacobian(system, t_mid, x_mid, u.at(t_mid));
    const Matrix A_lo = controlled_jacobian(system, t_lo, traj[j - 1], u[j - 1]);

    // dR/dt = -R A(t), stepped from t_hi to t_lo.
    const Matrix& r0 = R[j];
    const Matrix k1 = -r0 * A_hi;
    const Matrix k2 = -(r0 + 0.5 * h * k1) * A_mid;
    const Matrix k3 = -(r0 + 0.5 * h * k2) * A_mid;
    const Matrix k4 = -(r0 + h * k3) * A_lo;
    R[j - 1] = r0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!R[j - 1].allFinite()) {
      throw SteerError(ErrorKind::kDivergence,
                       "state-transition matrix not finite at node " + std::to_string(j - 1));
    }
  }
  return StmField{MatrixField(grid, std::move(R))};
}

FlowJacobianField flow_jacobian_field(const SystemModel& system, const Trajectory& traj,
                                      Anchor anchor, unsigned threads) {
  const TimeGrid& grid = traj.grid();
  const std::size_t n = grid.size();
  const std::size_t ja = anchor_index(grid, anchor);
  const double tau = grid.node(ja);
  const OdeRhs rhs = variational_rhs(system);
  const int d = system.d;

  std::vector<Matrix> out(n);
  parallel_for(n, threads, [&](std::size_t j) {
    if (j == ja) {
      out[j] = Matrix::Identity(d, d);
      return;
    }
    const std::size_t steps = j > ja ? j - ja : ja - j;
    try {
      const Vector z = integrate_between(rhs, grid.node(j), tau,
                                         pack(traj[j], Matrix::Identity(d, d)), steps);
      out[j] = Eigen::Map<const Matrix>(z.data() + d, d, d);
    } catch (const SteerError& e) {
      throw SteerError(ErrorKind::kDivergence,
                       "flow Jacobian solve from node " + std::to_string(j) + ": " + e.what());
    }
  });
  return FlowJacobianField{anchor, MatrixField(grid, std::move(out))};
}

AdjointRows adjoint_rows(const SystemModel& system, const Trajectory& traj, const StmField& stm,
                         const FlowJacobianField& dphi) {
  const TimeGrid& grid = traj.grid();
  require_same_grid(grid, stm.grid(), "adjoint_rows");
  require_same_grid(grid, dphi.grid(), "adjoint_rows");
  const std::size_t n = grid.size();

  // D Phi_{T,tau}(x_u(T)): identity for tau = T, the last field entry
  // otherwise (the node at T of the anchor-t0 field).
  const Matrix& dphi_T = dphi[n - 1];

  std::vector<Matrix> L(n), DF(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Matrix Bt = system.input(grid.node(j), traj[j]).transpose();
    L[j] = Bt * dphi[j].transpose();
    DF[j] = Bt * (dphi_T * stm[j]).transpose();
  }
  return AdjointRows{MatrixField(grid, std::move(L)), MatrixField(grid, std::move(DF))};
}

Vector apply_L(const SystemModel& system, const Trajectory& traj, const FlowJacobianField& dphi,
               const ControlSignal& v) {
  const TimeGrid& grid = traj.grid();
  require_same_grid(grid, dphi.grid(), "apply_L");
  require_same_grid(grid, v.grid(), "apply_L");
  std::vector<Vector> integrand(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    integrand[j] = dphi[j] * (system.input(grid.node(j), traj[j]) * v[j]);
  }
  return composite_quadrature(VectorField(grid, std::move(integrand)));
}

Vector apply_endpoint_differential(const SystemModel& system, const Trajectory& traj,
                                   const StmField& stm, const ControlSignal& v) {
  const TimeGrid& grid = traj.grid();
  require_same_grid(grid, stm.grid(), "apply_endpoint_differential");
  require_same_grid(grid, v.grid(), "apply_endpoint_differential");
  std::vector<Vector> integrand(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    integrand[j] = stm[j] * (system.input(grid.node(j), traj[j]) * v[j]);
  }
  return composite_quadrature(VectorField(grid, std::move(integrand)));
}

Vector transfer_target(const SystemModel& system, const TransferProblem& problem) {
  const TimeGrid& g = problem.grid;
  const std::size_t steps = g.size() - 1;
  if (problem.anchor == Anchor::kFinal) {
    return problem.x1 - flow_map(system, g.t0(), g.T(), problem.x0, steps);
  }
  return flow_map(system, g.T(), g.t0(), problem.x1, steps) - problem.x0;
}

Vector feasibility_residual(const SystemModel& system, const ControlSignal& u,
                            const Trajectory& traj, const FlowJacobianField& dphi,
                            const TransferProblem& problem) {
  require_same_grid(problem.grid, u.grid(), "feasibility_residual");
  if (dphi.anchor != problem.anchor) {
    throw SteerError(ErrorKind::kGrid, "feasibility_residual: flow Jacobian anchor mismatch");
  }
  return apply_L(system, traj, dphi, u) - transfer_target(system, problem);
}

}  // namespace steer
