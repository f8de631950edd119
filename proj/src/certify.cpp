#include "steer/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace steer {

const char* to_string(CertificateKind kind) {
  switch (kind) {
    case CertificateKind::kBracket: return "bracket";
    case CertificateKind::kFullyActuated: return "fully_actuated";
    case CertificateKind::kStmBound: return "stm_bound";
  }
  return "unknown";
}

void SampleBox::validate(int d) const {
  if (!(T > t0)) throw SteerError(ErrorKind::kSchema, "sample box needs t0 < T");
  if (n_t < 2 || n_x < 2) throw SteerError(ErrorKind::kSchema, "sample counts must be at least 2");
  if (lower.size() != d || upper.size() != d) {
    throw SteerError(ErrorKind::kSchema, "sample box dimension does not match the model");
  }
  for (int i = 0; i < d; ++i) {
    if (!(upper[i] >= lower[i])) throw SteerError(ErrorKind::kSchema, "sample box axis is empty");
  }
}

namespace {

double lattice_time(const SampleBox& box, int it) {
  return it + 1 == box.n_t ? box.T : box.t0 + (box.T - box.t0) * it / (box.n_t - 1);
}

double lattice_coord(const SampleBox& box, int axis, int ix) {
  return box.lower[axis] + (box.upper[axis] - box.lower[axis]) * ix / (box.n_x - 1);
}

// Evaluates f on the full (t, x) lattice and reduces to the minimum plus the
// largest neighbour slope. State axes are skipped when `state_free`.
template <typename F>
Certificate lattice_minimum(const SampleBox& box, int d, bool state_free, F&& f) {
  const int axes = state_free ? 0 : d;
  std::size_t per_time = 1;
  for (int a = 0; a < axes; ++a) per_time *= static_cast<std::size_t>(box.n_x);
  const std::size_t total = per_time * static_cast<std::size_t>(box.n_t);

  std::vector<double> values(total);
  std::vector<int> idx(axes);
  Vector x = 0.5 * (box.lower + box.upper);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat % per_time;
    for (int a = 0; a < axes; ++a) {
      idx[a] = static_cast<int>(rest % box.n_x);
      rest /= box.n_x;
      x[a] = lattice_coord(box, a, idx[a]);
    }
    const int it = static_cast<int>(flat / per_time);
    values[flat] = f(lattice_time(box, it), x);
  }

  Certificate c;
  const auto best = std::min_element(values.begin(), values.end());
  c.value = *best;
  const std::size_t flat_best = static_cast<std::size_t>(best - values.begin());
  c.arg_t = lattice_time(box, static_cast<int>(flat_best / per_time));
  c.arg_x = 0.5 * (box.lower + box.upper);
  {
    std::size_t rest = flat_best % per_time;
    for (int a = 0; a < axes; ++a) {
      c.arg_x[a] = lattice_coord(box, a, static_cast<int>(rest % box.n_x));
      rest /= box.n_x;
    }
  }

  // Slopes to the next neighbour along time and along every state axis.
  const double dt = (box.T - box.t0) / (box.n_t - 1);
  double lip = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    if (flat + per_time < total) {
      lip = std::max(lip, std::abs(values[flat + per_time] - values[flat]) / dt);
    }
    std::size_t stride = 1;
    std::size_t rest = flat % per_time;
    for (int a = 0; a < axes; ++a) {
      const auto ix = rest % box.n_x;
      rest /= box.n_x;
      const double dx = (box.upper[a] - box.lower[a]) / (box.n_x - 1);
      if (ix + 1 < static_cast<std::size_t>(box.n_x) && dx > 0.0) {
        lip = std::max(lip, std::abs(values[flat + stride] - values[flat]) / dx);
      }
      stride *= box.n_x;
    }
  }
  c.sampled_lipschitz = lip;
  return c;
}

double sigma_min(const Matrix& B) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(B.transpose() * B, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()(0)));
}

}  // namespace

Certificate bracket_infimum(const SystemModel& system, const SampleBox& box, double threshold) {
  if (system.d != 2 || system.k != 1 || !system.input_state_independent ||
      !system.input_time_derivative) {
    throw SteerError(ErrorKind::kApplicability,
                     "bracket certificate needs d = 2, k = 1 and a state-independent input "
                     "with known time derivative");
  }
  box.validate(system.d);
  Certificate c = lattice_minimum(box, system.d, false, [&](double t, const Vector& x) {
    const Vector b = system.input(t, x).col(0);
    const Vector m1 = system.drift_jacobian(t, x) * b - system.input_time_derivative(t).col(0);
    return std::abs(b[0] * m1[1] - b[1] * m1[0]);
  });
  c.kind = CertificateKind::kBracket;
  c.threshold = threshold;
  c.margin = c.value - threshold;
  c.passed = c.value > threshold;
  return c;
}

Certificate fully_actuated_floor(const SystemModel& system, const SampleBox& box, double lambda1) {
  if (system.k != system.d) {
    throw SteerError(ErrorKind::kApplicability, "fully-actuated floor needs k = d");
  }
  box.validate(system.d);
  const int axes = system.input_state_independent ? 0 : system.d;
  std::size_t per_time = 1;
  for (int a = 0; a < axes; ++a) per_time *= static_cast<std::size_t>(box.n_x);

  std::vector<double> b(box.n_t, std::numeric_limits<double>::infinity());
  Certificate worst;
  worst.value = std::numeric_limits<double>::infinity();
  Vector x = 0.5 * (box.lower + box.upper);
  for (int it = 0; it < box.n_t; ++it) {
    const double t = lattice_time(box, it);
    for (std::size_t flat = 0; flat < per_time; ++flat) {
      std::size_t rest = flat;
      for (int a = 0; a < axes; ++a) {
        x[a] = lattice_coord(box, a, static_cast<int>(rest % box.n_x));
        rest /= box.n_x;
      }
      const double s = sigma_min(system.input(t, x));
      b[it] = std::min(b[it], s);
      if (s < worst.value) {
        worst.value = s;
        worst.arg_t = t;
        worst.arg_x = x;
      }
    }
  }

  const double horizon = box.T - box.t0;
  double b_l1 = 0.0;
  if (box.n_t % 2 == 1) {
    b_l1 = composite_quadrature(TimeGrid(box.t0, box.T, box.n_t), b);
  } else {
    // Trapezoid when the lattice is not Simpson compatible.
    const double dt = horizon / (box.n_t - 1);
    for (int it = 0; it + 1 < box.n_t; ++it) b_l1 += 0.5 * dt * (b[it] + b[it + 1]);
  }
  double lip = 0.0;
  for (int it = 0; it + 1 < box.n_t; ++it) {
    lip = std::max(lip, std::abs(b[it + 1] - b[it]) * (box.n_t - 1) / horizon);
  }

  Certificate c;
  c.kind = CertificateKind::kFullyActuated;
  c.value = std::exp(-2.0 * lambda1 * horizon) * b_l1 * b_l1 / horizon;
  c.threshold = 0.0;
  c.margin = c.value;
  c.passed = c.value > 0.0;
  c.arg_t = worst.arg_t;
  c.arg_x = worst.arg_x;
  c.sampled_lipschitz = lip;
  std::ostringstream note;
  note << "min sigma_min(B) = " << worst.value << ", |b|_1 = " << b_l1;
  if (!c.passed) note << "; zero floor";
  c.note = note.str();
  return c;
}

Certificate stm_bound_audit(const SystemModel& system, const ControlSignal& u,
                            const Trajectory& traj, const StmField& stm,
                            std::optional<SystemBounds> bounds) {
  if (!bounds) {
    throw SteerError(ErrorKind::kApplicability,
                     "STM bound audit needs Lambda1 and L_B for model '" + system.name + "'");
  }
  const TimeGrid& g = traj.grid();
  if (!(g == stm.grid()) || !(g == u.grid())) {
    throw SteerError(ErrorKind::kGrid, "stm_bound_audit: grids differ");
  }
  const double rate = bounds->lambda1 + bounds->l_b * u.sup_norm();
  Certificate c;
  c.kind = CertificateKind::kStmBound;
  c.value = 0.0;
  c.threshold = 1.0 + 1e-6;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double norm2 = stm[j].jacobiSvd().singularValues()(0);
    const double ratio = norm2 * std::exp(-rate * (g.T() - g.node(j)));
    if (ratio > c.value || j == 0) {
      c.value = ratio;
      c.arg_t = g.node(j);
      c.arg_x = traj[j];
    }
  }
  c.margin = c.threshold - c.value;
  c.passed = c.value <= c.threshold;
  std::ostringstream note;
  note << "Lambda1 = " << bounds->lambda1 << ", L_B = " << bounds->l_b
       << ", |u|_inf = " << u.sup_norm();
  c.note = note.str();
  return c;
}

}  // namespace steer
