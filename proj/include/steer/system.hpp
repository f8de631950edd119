#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "steer/ode.hpp"

namespace steer {

/// Rate constants for the STM growth bound: |D_x N| <= lambda1 and
/// |sum_j u_j D_x B^(j)| <= l_b |u|.
struct SystemBounds {
  double lambda1 = 0.0;
  double l_b = 0.0;
};

/// Control-affine dynamics x' = N_t(x) + B_t(x) u.
///
/// All evaluators must be pure and reentrant. `input_jacobian` returns one
/// d x d matrix per input column: slice j is D_x of column j of B_t(x).
struct SystemModel {
  std::string name;
  int d = 0;
  int k = 0;
  std::function<Vector(double, const Vector&)> drift;
  std::function<Matrix(double, const Vector&)> drift_jacobian;
  std::function<Matrix(double, const Vector&)> input;
  std::function<std::vector<Matrix>(double, const Vector&)> input_jacobian;
  // Only meaningful when the input matrix is state independent.
  std::function<Matrix(double)> input_time_derivative;
  bool input_state_independent = false;
  std::optional<SystemBounds> bounds;

  /// Throws kModel when the declared shapes are inconsistent.
  void validate() const;
};

enum class Interpolation { kLinear, kCubic };

/// Control samples on a grid. Between nodes the signal is interpolated
/// piecewise-linearly or with a local four-node cubic.
class ControlSignal {
 public:
  ControlSignal(TimeGrid grid, std::vector<Vector> values,
                Interpolation interpolation = Interpolation::kCubic);

  static ControlSignal zero(const TimeGrid& grid, int k,
                            Interpolation interpolation = Interpolation::kCubic);
  static ControlSignal constant(const TimeGrid& grid, const Vector& value,
                                Interpolation interpolation = Interpolation::kCubic);
  static ControlSignal sample(const TimeGrid& grid, const std::function<Vector(double)>& f,
                              Interpolation interpolation = Interpolation::kCubic);

  const TimeGrid& grid() const noexcept { return samples_.grid; }
  const std::vector<Vector>& values() const noexcept { return samples_.values; }
  const VectorField& samples() const noexcept { return samples_; }
  const Vector& operator[](std::size_t j) const { return samples_.values[j]; }
  std::size_t size() const noexcept { return samples_.size(); }
  int k() const noexcept { return static_cast<int>(samples_.values.front().size()); }
  Interpolation interpolation() const noexcept { return interpolation_; }

  /// Value at an arbitrary time in [t0, T] (clamped outside).
  Vector at(double t) const;

  /// max_j |u(t_j)| with the Euclidean norm on R^k.
  double sup_norm() const;
  /// Composite Simpson value of |u(t)|^2.
  double l2_norm_squared() const;
  double energy() const { return 0.5 * l2_norm_squared(); }

 private:
  VectorField samples_;
  Interpolation interpolation_;
};

double sup_distance(const ControlSignal& a, const ControlSignal& b);

/// States of a controlled run, one per grid node.
struct Trajectory {
  VectorField states;

  const TimeGrid& grid() const noexcept { return states.grid; }
  const Vector& operator[](std::size_t j) const { return states.values[j]; }
  const Vector& endpoint() const { return states.values.back(); }
  std::size_t size() const noexcept { return states.size(); }
};

enum class Anchor { kInitial, kFinal };

struct TransferProblem {
  Vector x0;
  Vector x1;
  TimeGrid grid;
  Anchor anchor = Anchor::kFinal;

  double anchor_time() const { return anchor == Anchor::kInitial ? grid.t0() : grid.T(); }
  /// Throws kSchema when vector sizes disagree with the system.
  void validate(const SystemModel& system) const;
};

/// Integrates the controlled dynamics with u interpolated between nodes.
Trajectory simulate(const SystemModel& system, const ControlSignal& u, const Vector& x0);

/// Closed-loop run with u = feedback(t, x). The returned control holds the
/// feedback evaluated along the computed states.
struct ClosedLoopRun {
  Trajectory trajectory;
  ControlSignal control;
};
ClosedLoopRun simulate_feedback(const SystemModel& system,
                                const std::function<Vector(double, const Vector&)>& feedback,
                                const TimeGrid& grid, const Vector& x0);

/// Largest relative mismatch between analytic Jacobians and central
/// differences, |J - J_fd| / max(1, |J_fd|), over random probes drawn from
/// [t_lo, t_hi] x box.
struct JacobianAudit {
  double drift_error = 0.0;
  double input_error = 0.0;
  int probes = 0;
};
JacobianAudit audit_jacobians(const SystemModel& system, double t_lo, double t_hi,
                              const Vector& box_lo, const Vector& box_hi, int probes,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Builtin models

struct PendulumParams {
  double g = 9.81;
  double l0 = 4.0;
  double l1 = 2.0;
  double m = 1.0;
  double nu = 0.2;
  double omega = 2.0;
  double beta = 0.2;  // damping coefficient in gamma(t); defaults to nu's value
};

/// Time-varying coefficients of the varying-length pendulum with phi = cos t.
class PendulumCoefficients {
 public:
  explicit PendulumCoefficients(const PendulumParams& p);

  double epsilon() const noexcept { return epsilon_; }
  double lambda() const noexcept { return lambda_; }
  double b(double t) const;
  double b_dot(double t) const;
  double a(double t) const;
  double gamma(double t) const;

 private:
  double epsilon_;
  double lambda_;
  double beta_;
};

SystemModel make_pendulum(const PendulumParams& params = {});

struct RnnParams {
  Eigen::Vector3d decay = Eigen::Vector3d(1.25, 1.5, 1.0);  // diagonal of D
  Eigen::Matrix3d weights = (Eigen::Matrix3d() << 3, 1, -0.5, 2, 1, 0.5, 0, -1.5, 1.25).finished();
};

SystemModel make_rnn(const RnnParams& params = {});

SystemModel make_unicycle();

/// x' = A x + B u with constant matrices.
SystemModel make_linear(const Matrix& A, const Matrix& B);

/// Double integrator A = [[0,1],[0,0]], B = (0,1)^T.
SystemModel make_double_integrator();

}  // namespace steer
