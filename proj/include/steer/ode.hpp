#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "steer/error.hpp"

namespace steer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Uniform nodes t_j = t0 + j (T - t0) / (n - 1).
/// Any n >= 3 is accepted; Simpson quadrature additionally needs odd n.
class TimeGrid {
 public:
  TimeGrid(double t0, double T, std::size_t n);

  double t0() const noexcept { return t0_; }
  double T() const noexcept { return T_; }
  std::size_t size() const noexcept { return n_; }
  double step() const noexcept { return (T_ - t0_) / static_cast<double>(n_ - 1); }
  double horizon() const noexcept { return T_ - t0_; }
  double node(std::size_t j) const noexcept {
    // Pin the last node so that node(n-1) == T exactly.
    return j + 1 == n_ ? T_ : t0_ + static_cast<double>(j) * step();
  }
  bool simpson_compatible() const noexcept { return n_ % 2 == 1; }
  std::vector<double> nodes() const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double t0_;
  double T_;
  std::size_t n_;
};

/// One value (vector or matrix) per grid node.
template <typename Value>
struct GridFunction {
  TimeGrid grid;
  std::vector<Value> values;

  GridFunction(TimeGrid g, std::vector<Value> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) {
      throw SteerError(ErrorKind::kGrid, "grid function has " + std::to_string(values.size()) +
                                             " values for " + std::to_string(grid.size()) +
                                             " nodes");
    }
  }

  const Value& operator[](std::size_t j) const { return values[j]; }
  Value& operator[](std::size_t j) { return values[j]; }
  std::size_t size() const noexcept { return values.size(); }
  const Value& back() const { return values.back(); }
};

using VectorField = GridFunction<Vector>;
using MatrixField = GridFunction<Matrix>;

/// Right-hand side f(t, x) of x' = f(t, x).
using OdeRhs = std::function<Vector(double, const Vector&)>;

/// One classical Runge-Kutta step of size h (h may be negative).
Vector rk4_step(const OdeRhs& rhs, double t, const Vector& x, double h);

/// Integrates from s to t in `steps` equal RK4 steps and returns x(t).
/// Backward integration (t < s) is allowed.
Vector integrate_between(const OdeRhs& rhs, double s, double t, const Vector& x0,
                         std::size_t steps);

/// RK4 samples at every node of `grid`, starting from x0 at grid.t0().
/// Throws kDivergence naming the first node whose state is not finite.
VectorField integrate_ode(const OdeRhs& rhs, const TimeGrid& grid, const Vector& x0);

/// Composite Simpson weights for an odd node count; throws kGrid otherwise.
std::vector<double> simpson_weights(const TimeGrid& grid);

/// Composite Simpson integral of nodal samples. Exact for cubics.
template <typename Value>
auto composite_quadrature(const GridFunction<Value>& samples) {
  const std::vector<double> w = simpson_weights(samples.grid);
  using Result = std::decay_t<decltype((samples.values[0] * 1.0).eval())>;
  Result sum = (samples.values[0] * w[0]).eval();
  for (std::size_t j = 1; j < w.size(); ++j) sum += samples.values[j] * w[j];
  return sum;
}

/// Scalar overload on raw samples.
double composite_quadrature(const TimeGrid& grid, const std::vector<double>& samples);

}  // namespace steer
