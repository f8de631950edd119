#include "steer/ode.hpp"

#include <sstream>

namespace steer {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kGrid: return "grid";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kCoercivity: return "coercivity";
    case ErrorKind::kSingularGramian: return "singular_gramian";
    case ErrorKind::kNonConvergence: return "non_convergence";
    case ErrorKind::kModel: return "model";
    case ErrorKind::kApplicability: return "applicability";
    case ErrorKind::kSingularInput: return "singular_input";
    case ErrorKind::kComparison: return "comparison";
  }
  return "unknown";
}

TimeGrid::TimeGrid(double t0, double T, std::size_t n) : t0_(t0), T_(T), n_(n) {
  if (!std::isfinite(t0) || !std::isfinite(T) || !(T > t0)) {
    throw SteerError(ErrorKind::kGrid, "time grid requires finite t0 < T");
  }
  if (n < 3) throw SteerError(ErrorKind::kGrid, "time grid requires at least 3 nodes");
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(n_);
  for (std::size_t j = 0; j < n_; ++j) out[j] = node(j);
  return out;
}

Vector rk4_step(const OdeRhs& rhs, double t, const Vector& x, double h) {
  const double half = 0.5 * h;
  const Vector k1 = rhs(t, x);
  const Vector k2 = rhs(t + half, x + half * k1);
  const Vector k3 = rhs(t + half, x + half * k2);
  const Vector k4 = rhs(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector integrate_between(const OdeRhs& rhs, double s, double t, const Vector& x0,
                         std::size_t steps) {
  if (s == t || steps == 0) return x0;
  const double h = (t - s) / static_cast<double>(steps);
  Vector x = x0;
  for (std::size_t m = 0; m < steps; ++m) {
    const double tm = s + static_cast<double>(m) * h;
    x = rk4_step(rhs, tm, x, h);
    if (!x.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite state after step " << m + 1 << " of " << steps << " (t = "
          << tm + h << ")";
      throw SteerError(ErrorKind::kDivergence, msg.str());
    }
  }
  return x;
}

VectorField integrate_ode(const OdeRhs& rhs, const TimeGrid& grid, const Vector& x0) {
  std::vector<Vector> values;
  values.reserve(grid.size());
  values.push_back(x0);
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double t = grid.node(j);
    values.push_back(rk4_step(rhs, t, values.back(), grid.node(j + 1) - t));
    if (!values.back().allFinite()) {
      std::ostringstream msg;
      msg << "non-finite state at node " << j + 1 << " (t = " << grid.node(j + 1) << ")";
      throw SteerError(ErrorKind::kDivergence, msg.str());
    }
  }
  return VectorField(grid, std::move(values));
}

std::vector<double> simpson_weights(const TimeGrid& grid) {
  if (!grid.simpson_compatible()) {
    throw SteerError(ErrorKind::kGrid, "composite Simpson needs an odd node count, got " +
                                           std::to_string(grid.size()));
  }
  const std::size_t n = grid.size();
  const double h3 = grid.step() / 3.0;
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == 0 || j + 1 == n) {
      w[j] = h3;
    } else {
      w[j] = (j % 2 == 1 ? 4.0 : 2.0) * h3;
    }
  }
  return w;
}

double composite_quadrature(const TimeGrid& grid, const std::vector<double>& samples) {
  if (samples.size() != grid.size()) {
    throw SteerError(ErrorKind::kGrid, "sample count does not match grid");
  }
  const std::vector<double> w = simpson_weights(grid);
  double sum = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) sum += w[j] * samples[j];
  return sum;
}

}  // namespace steer
