#include "steer/system.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace steer {

void SystemModel::validate() const {
  if (d <= 0 || k <= 0 || k > d) {
    throw SteerError(ErrorKind::kModel, "model '" + name + "' needs 0 < k <= d");
  }
  if (!drift || !drift_jacobian || !input || !input_jacobian) {
    throw SteerError(ErrorKind::kModel, "model '" + name + "' is missing an evaluator");
  }
}

void TransferProblem::validate(const SystemModel& system) const {
  if (x0.size() != system.d) {
    throw SteerError(ErrorKind::kSchema, "x0 has dimension " + std::to_string(x0.size()) +
                                             ", model '" + system.name + "' expects " +
                                             std::to_string(system.d));
  }
  if (x1.size() != system.d) {
    throw SteerError(ErrorKind::kSchema, "x1 has dimension " + std::to_string(x1.size()) +
                                             ", model '" + system.name + "' expects " +
                                             std::to_string(system.d));
  }
  if (!x0.allFinite() || !x1.allFinite()) {
    throw SteerError(ErrorKind::kSchema, "transfer endpoints must be finite");
  }
}

// ---------------------------------------------------------------------------
// ControlSignal

ControlSignal::ControlSignal(TimeGrid grid, std::vector<Vector> values,
                             Interpolation interpolation)
    : samples_(grid, std::move(values)), interpolation_(interpolation) {
  const auto k = samples_.values.front().size();
  for (const auto& v : samples_.values) {
    if (v.size() != k || k == 0) {
      throw SteerError(ErrorKind::kSchema, "control samples must share one nonzero size");
    }
    if (!v.allFinite()) throw SteerError(ErrorKind::kSchema, "control samples must be finite");
  }
}

ControlSignal ControlSignal::zero(const TimeGrid& grid, int k, Interpolation interpolation) {
  return constant(grid, Vector::Zero(k), interpolation);
}

ControlSignal ControlSignal::constant(const TimeGrid& grid, const Vector& value,
                                      Interpolation interpolation) {
  return ControlSignal(grid, std::vector<Vector>(grid.size(), value), interpolation);
}

ControlSignal ControlSignal::sample(const TimeGrid& grid, const std::function<Vector(double)>& f,
                                    Interpolation interpolation) {
  std::vector<Vector> values;
  values.reserve(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) values.push_back(f(grid.node(j)));
  return ControlSignal(grid, std::move(values), interpolation);
}

Vector ControlSignal::at(double t) const {
  const TimeGrid& g = grid();
  const auto& v = samples_.values;
  const std::size_t n = g.size();
  const double h = g.step();
  const double s = std::clamp((t - g.t0()) / h, 0.0, static_cast<double>(n - 1));
  const auto j = std::min(static_cast<std::size_t>(s), n - 2);

  if (interpolation_ == Interpolation::kLinear || n < 4) {
    const double r = s - static_cast<double>(j);
    return (1.0 - r) * v[j] + r * v[j + 1];
  }
  // Four-node Lagrange cubic on nodes i0..i0+3 surrounding [t_j, t_j+1].
  const std::size_t i0 = std::min(j == 0 ? 0 : j - 1, n - 4);
  const double r = s - static_cast<double>(i0);
  const double l0 = -(r - 1.0) * (r - 2.0) * (r - 3.0) / 6.0;
  const double l1 = r * (r - 2.0) * (r - 3.0) / 2.0;
  const double l2 = -r * (r - 1.0) * (r - 3.0) / 2.0;
  const double l3 = r * (r - 1.0) * (r - 2.0) / 6.0;
  return l0 * v[i0] + l1 * v[i0 + 1] + l2 * v[i0 + 2] + l3 * v[i0 + 3];
}

double ControlSignal::sup_norm() const {
  double m = 0.0;
  for (const auto& v : samples_.values) m = std::max(m, v.norm());
  return m;
}

double ControlSignal::l2_norm_squared() const {
  std::vector<double> sq(size());
  for (std::size_t j = 0; j < size(); ++j) sq[j] = samples_.values[j].squaredNorm();
  return composite_quadrature(grid(), sq);
}

double sup_distance(const ControlSignal& a, const ControlSignal& b) {
  if (!(a.grid() == b.grid())) throw SteerError(ErrorKind::kGrid, "controls on different grids");
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, (a[j] - b[j]).norm());
  return m;
}

// ---------------------------------------------------------------------------
// Simulation

Trajectory simulate(const SystemModel& system, const ControlSignal& u, const Vector& x0) {
  if (x0.size() != system.d || u.k() != system.k) {
    throw SteerError(ErrorKind::kSchema, "simulate: dimensions do not match model '" +
                                             system.name + "'");
  }
  const OdeRhs rhs = [&](double t, const Vector& x) -> Vector {
    return system.drift(t, x) + system.input(t, x) * u.at(t);
  };
  return Trajectory{integrate_ode(rhs, u.grid(), x0)};
}

ClosedLoopRun simulate_feedback(const SystemModel& system,
                                const std::function<Vector(double, const Vector&)>& feedback,
                                const TimeGrid& grid, const Vector& x0) {
  if (x0.size() != system.d) {
    throw SteerError(ErrorKind::kSchema, "simulate_feedback: x0 dimension mismatch");
  }
  const OdeRhs rhs = [&](double t, const Vector& x) -> Vector {
    return system.drift(t, x) + system.input(t, x) * feedback(t, x);
  };
  Trajectory traj{integrate_ode(rhs, grid, x0)};
  std::vector<Vector> u;
  u.reserve(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) u.push_back(feedback(grid.node(j), traj[j]));
  return {std::move(traj), ControlSignal(grid, std::move(u))};
}

JacobianAudit audit_jacobians(const SystemModel& system, double t_lo, double t_hi,
                              const Vector& box_lo, const Vector& box_hi, int probes,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto rel = [](const Matrix& analytic, const Matrix& fd) {
    return (analytic - fd).norm() / std::max(1.0, fd.norm());
  };

  JacobianAudit out;
  out.probes = probes;
  for (int p = 0; p < probes; ++p) {
    const double t = t_lo + (t_hi - t_lo) * unit(rng);
    Vector x(system.d);
    for (int i = 0; i < system.d; ++i) x[i] = box_lo[i] + (box_hi[i] - box_lo[i]) * unit(rng);
    const double eps = 1e-6 * (1.0 + x.norm());

    Matrix jn_fd(system.d, system.d);
    std::vector<Matrix> jb_fd(system.k, Matrix(system.d, system.d));
    for (int i = 0; i < system.d; ++i) {
      Vector xp = x, xm = x;
      xp[i] += eps;
      xm[i] -= eps;
      jn_fd.col(i) = (system.drift(t, xp) - system.drift(t, xm)) / (2.0 * eps);
      const Matrix db = (system.input(t, xp) - system.input(t, xm)) / (2.0 * eps);
      for (int c = 0; c < system.k; ++c) jb_fd[c].col(i) = db.col(c);
    }
    out.drift_error = std::max(out.drift_error, rel(system.drift_jacobian(t, x), jn_fd));
    const auto jb = system.input_jacobian(t, x);
    for (int c = 0; c < system.k; ++c) out.input_error = std::max(out.input_error, rel(jb[c], jb_fd[c]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pendulum

PendulumCoefficients::PendulumCoefficients(const PendulumParams& p) {
  if (!(p.l0 > 0.0)) throw SteerError(ErrorKind::kModel, "pendulum needs l0 > 0");
  if (p.omega == 0.0) throw SteerError(ErrorKind::kModel, "pendulum needs omega != 0");
  if (!(p.g > 0.0)) throw SteerError(ErrorKind::kModel, "pendulum needs g > 0");
  epsilon_ = p.l1 / p.l0;
  if (std::abs(epsilon_) >= 1.0) {
    throw SteerError(ErrorKind::kModel,
                     "singular length: |l1| >= l0 lets 1 + eps cos t vanish");
  }
  lambda_ = std::sqrt(p.g / p.l0) / p.omega;
  beta_ = p.beta;
}

double PendulumCoefficients::b(double t) const {
  const double s = 1.0 + epsilon_ * std::cos(t);
  return 1.0 / (s * s);
}

double PendulumCoefficients::b_dot(double t) const {
  const double s = 1.0 + epsilon_ * std::cos(t);
  return 2.0 * epsilon_ * std::sin(t) / (s * s * s);
}

double PendulumCoefficients::a(double t) const { return lambda_ * lambda_ * std::sqrt(b(t)); }

double PendulumCoefficients::gamma(double t) const {
  return -2.0 * epsilon_ * b(t) * std::sin(t) + beta_ * lambda_;
}

SystemModel make_pendulum(const PendulumParams& params) {
  const PendulumCoefficients c(params);
  SystemModel m;
  m.name = "pendulum";
  m.d = 2;
  m.k = 1;
  m.drift = [c](double t, const Vector& x) -> Vector {
    Vector f(2);
    f << x[1], -c.a(t) * std::sin(x[0]) - c.gamma(t) * x[1];
    return f;
  };
  m.drift_jacobian = [c](double t, const Vector& x) -> Matrix {
    Matrix j(2, 2);
    j << 0.0, 1.0, -c.a(t) * std::cos(x[0]), -c.gamma(t);
    return j;
  };
  m.input = [c](double t, const Vector&) -> Matrix {
    Matrix b(2, 1);
    b << 0.0, c.b(t);
    return b;
  };
  m.input_jacobian = [](double, const Vector&) { return std::vector<Matrix>{Matrix::Zero(2, 2)}; };
  m.input_time_derivative = [c](double t) -> Matrix {
    Matrix b(2, 1);
    b << 0.0, c.b_dot(t);
    return b;
  };
  m.input_state_independent = true;

  // |DN|_2 <= |DN|_F <= sqrt(1 + max a^2 + max gamma^2). The maxima are
  // taken over one period of the 2 pi periodic coefficients on a fine
  // lattice with a relative safety margin.
  double a_max = 0.0, g_max = 0.0;
  constexpr int kSamples = 20000;
  for (int i = 0; i <= kSamples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / kSamples;
    a_max = std::max(a_max, std::abs(c.a(t)));
    g_max = std::max(g_max, std::abs(c.gamma(t)));
  }
  a_max *= 1.001;
  g_max *= 1.001;
  m.bounds = SystemBounds{std::sqrt(1.0 + a_max * a_max + g_max * g_max), 0.0};
  return m;
}

// ---------------------------------------------------------------------------
// RNN

namespace {
double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }
}  // namespace

SystemModel make_rnn(const RnnParams& params) {
  const Eigen::Matrix3d D = params.decay.asDiagonal();
  const Eigen::Matrix3d W = params.weights;
  SystemModel m;
  m.name = "rnn3";
  m.d = 3;
  m.k = 3;
  m.drift = [D, W](double, const Vector& x) -> Vector {
    Eigen::Vector3d s;
    for (int i = 0; i < 3; ++i) s[i] = logistic(x[i]);
    return -D * x + W * s;
  };
  m.drift_jacobian = [D, W](double, const Vector& x) -> Matrix {
    Eigen::Vector3d ds;
    for (int i = 0; i < 3; ++i) {
      const double s = logistic(x[i]);
      ds[i] = s * (1.0 - s);
    }
    return -D + W * ds.asDiagonal();
  };
  m.input = [](double, const Vector&) -> Matrix { return Matrix::Identity(3, 3); };
  m.input_jacobian = [](double, const Vector&) {
    return std::vector<Matrix>(3, Matrix::Zero(3, 3));
  };
  m.input_time_derivative = [](double) -> Matrix { return Matrix::Zero(3, 3); };
  m.input_state_independent = true;
  // sigma' <= 1/4 and |W|_2 <= |W|_F.
  m.bounds = SystemBounds{params.decay.cwiseAbs().maxCoeff() + 0.25 * W.norm(), 0.0};
  return m;
}

// ---------------------------------------------------------------------------
// Unicycle

SystemModel make_unicycle() {
  SystemModel m;
  m.name = "unicycle";
  m.d = 3;
  m.k = 2;
  m.drift = [](double, const Vector&) -> Vector { return Vector::Zero(3); };
  m.drift_jacobian = [](double, const Vector&) -> Matrix { return Matrix::Zero(3, 3); };
  m.input = [](double, const Vector& x) -> Matrix {
    Matrix b = Matrix::Zero(3, 2);
    b(0, 0) = std::cos(x[2]);
    b(1, 0) = std::sin(x[2]);
    b(2, 1) = 1.0;
    return b;
  };
  m.input_jacobian = [](double, const Vector& x) {
    std::vector<Matrix> out(2, Matrix::Zero(3, 3));
    out[0](0, 2) = -std::sin(x[2]);
    out[0](1, 2) = std::cos(x[2]);
    return out;
  };
  m.bounds = SystemBounds{0.0, 1.0};
  return m;
}

// ---------------------------------------------------------------------------
// Linear

SystemModel make_linear(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || B.cols() < 1 || B.cols() > A.rows()) {
    throw SteerError(ErrorKind::kModel, "linear model needs square A and B with d rows, k <= d");
  }
  SystemModel m;
  m.name = "linear";
  m.d = static_cast<int>(A.rows());
  m.k = static_cast<int>(B.cols());
  m.drift = [A](double, const Vector& x) -> Vector { return A * x; };
  m.drift_jacobian = [A](double, const Vector&) -> Matrix { return A; };
  m.input = [B](double, const Vector&) -> Matrix { return B; };
  const int d = m.d, k = m.k;
  m.input_jacobian = [d, k](double, const Vector&) {
    return std::vector<Matrix>(k, Matrix::Zero(d, d));
  };
  m.input_time_derivative = [d, k](double) -> Matrix { return Matrix::Zero(d, k); };
  m.input_state_independent = true;
  m.bounds = SystemBounds{A.jacobiSvd().singularValues()(0), 0.0};
  return m;
}

SystemModel make_double_integrator() {
  Matrix A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  SystemModel m = make_linear(A, B);
  m.name = "double_integrator";
  return m;
}

}  // namespace steer
