#pragma once

#include <cstddef>

#include "steer/system.hpp"

namespace steer {

/// Phi_{s,t}(x): drift-only flow from time s to time t in `steps` RK4 steps.
Vector flow_map(const SystemModel& system, double s, double t, const Vector& x,
                std::size_t steps);

/// D Phi_{s,t}(x) from the variational equation Y' = D_x N_r(Phi_{s,r}(x)) Y,
/// Y(s) = Id, integrated jointly with the base flow.
Matrix flow_jacobian(const SystemModel& system, double s, double t, const Vector& x,
                     std::size_t steps);

/// matrices[j] = R_u(T, t_j), the controlled state-transition matrix.
struct StmField {
  MatrixField matrices;
  const TimeGrid& grid() const noexcept { return matrices.grid; }
  const Matrix& operator[](std::size_t j) const { return matrices.values[j]; }
};

/// Backward sweep d/dt R(T,t) = -R(T,t) A_u(t) from R(T,T) = Id with
/// A_u = D_x N_t(x_u) + sum_j u_j D_x B_t^(j)(x_u). Midpoint states come from
/// cubic Hermite interpolation of the trajectory.
StmField controlled_stm(const SystemModel& system, const ControlSignal& u, const Trajectory& traj);

/// matrices[j] = D Phi_{t_j, tau}(x_u(t_j)).
struct FlowJacobianField {
  Anchor anchor;
  MatrixField matrices;
  const TimeGrid& grid() const noexcept { return matrices.grid; }
  const Matrix& operator[](std::size_t j) const { return matrices.values[j]; }
};

/// One independent drift-only variational solve per node, from t_j to the
/// anchor. Solves are distributed over `threads` workers.
FlowJacobianField flow_jacobian_field(const SystemModel& system, const Trajectory& traj,
                                      Anchor anchor, unsigned threads = 1);

/// Pointwise kernels of the adjoints L* and DF(u)*, each k x d per node.
struct AdjointRows {
  MatrixField L_rows;   // B_t^T D Phi_{t,tau}^T
  MatrixField DF_rows;  // B_t^T Q_{u,tau}(T,t)^T, Q = D Phi_{T,tau}(x_u(T)) R_u(T,t)
  const TimeGrid& grid() const noexcept { return L_rows.grid; }
};

AdjointRows adjoint_rows(const SystemModel& system, const Trajectory& traj, const StmField& stm,
                         const FlowJacobianField& dphi);

/// L_{u,tau} v = int D Phi_{t,tau}(x_u(t)) B_t(x_u(t)) v(t) dt (Simpson).
Vector apply_L(const SystemModel& system, const Trajectory& traj, const FlowJacobianField& dphi,
               const ControlSignal& v);

/// D E(u) v = int R_u(T,t) B_t(x_u(t)) v(t) dt (Simpson).
Vector apply_endpoint_differential(const SystemModel& system, const Trajectory& traj,
                                   const StmField& stm, const ControlSignal& v);

/// y_tau = Phi_{T,tau}(x1) - Phi_{t0,tau}(x0).
Vector transfer_target(const SystemModel& system, const TransferProblem& problem);

/// F_tau(u) = L_{u,tau} u - y_tau.
Vector feasibility_residual(const SystemModel& system, const ControlSignal& u,
                            const Trajectory& traj, const FlowJacobianField& dphi,
                            const TransferProblem& problem);

}  // namespace steer
