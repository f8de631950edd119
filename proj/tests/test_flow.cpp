#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "steer/flow.hpp"

using namespace steer;

namespace {

Matrix nilpotent() {
  Matrix A(2, 2);
  A << 0, 1, 0, 0;
  return A;
}

Matrix damped() {
  Matrix A(2, 2);
  A << 0, 1, -2, -0.3;
  return A;
}

double max_diff(const std::vector<Matrix>& a, const MatrixField& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, (a[j] - b[j]).norm());
  return m;
}

}  // namespace

TEST_CASE("flow_map examples") {
  const SystemModel uni = make_unicycle();
  const Vector x(Eigen::Vector3d(0.3, -1, 2));
  CHECK((flow_map(uni, 0.0, 1.5, x, 50) - x).norm() == 0.0);

  const SystemModel lin = make_linear(nilpotent(), Matrix::Identity(2, 1));
  CHECK((flow_map(lin, 0, 1, Eigen::Vector2d(0, 1), 20) - Eigen::Vector2d(1, 1)).norm() < 1e-14);
}

TEST_CASE("flow_map group law on the pendulum") {
  const SystemModel pend = make_pendulum();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-3, 3), t(0, 3);
  for (int i = 0; i < 20; ++i) {
    double r = t(rng), s = t(rng), u = t(rng);
    const Vector x(Eigen::Vector2d(ang(rng), ang(rng)));
    const Vector two = flow_map(pend, s, u, flow_map(pend, r, s, x, 400), 400);
    const Vector one = flow_map(pend, r, u, x, 400);
    CHECK((two - one).norm() < 1e-7);
  }
}

TEST_CASE("flow_jacobian examples") {
  const SystemModel uni = make_unicycle();
  CHECK((flow_jacobian(uni, 0, 2, Eigen::Vector3d(1, 2, 3), 10) - Matrix::Identity(3, 3)).norm() == 0.0);

  const SystemModel lin = make_linear(damped(), Matrix::Identity(2, 1));
  for (double t : {1.0, -0.5}) {
    const Matrix J = flow_jacobian(lin, 0.2, t, Eigen::Vector2d(1, -1), 200);
    CHECK((J - oracle::expm(damped() * (t - 0.2))).norm() < 1e-8);
  }

  const SystemModel pend = make_pendulum();
  const Vector x(Eigen::Vector2d(0.7, -0.4));
  const Matrix J = flow_jacobian(pend, 0.5, 2.0, x, 300);
  Matrix fd(2, 2);
  for (int c = 0; c < 2; ++c) {
    const double eps = 1e-6 * (1 + x.norm());
    Vector e = Vector::Zero(2);
    e[c] = eps;
    fd.col(c) = (flow_map(pend, 0.5, 2.0, x + e, 300) - flow_map(pend, 0.5, 2.0, x - e, 300)) / (2 * eps);
  }
  CHECK((J - fd).norm() / fd.norm() < 1e-5);
}

TEST_CASE("controlled_stm: zero drift and linear drift") {
  const TimeGrid g(0, 1.5, 151);
  const SystemModel uni = make_unicycle();
  const auto u0 = ControlSignal::zero(g, 2);
  const auto stm0 = controlled_stm(uni, u0, simulate(uni, u0, Vector::Zero(3)));
  for (const auto& R : stm0.matrices.values) CHECK((R - Matrix::Identity(3, 3)).norm() == 0.0);

  const SystemModel lin = make_linear(damped(), Eigen::Vector2d(0, 1));
  const auto ul = ControlSignal::zero(g, 1);
  const auto stm = controlled_stm(lin, ul, simulate(lin, ul, Eigen::Vector2d(1, 0)));
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK((stm[j] - oracle::expm(damped() * (g.T() - g.node(j)))).norm() < 1e-8);
  }
  CHECK((stm.matrices.back() - Matrix::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("controlled_stm: unicycle with constant input against the forward construction") {
  const SystemModel uni = make_unicycle();
  const TimeGrid g(0, 2, 201);
  const auto u = ControlSignal::constant(g, Eigen::Vector2d(1.2, 0.8));
  const auto traj = simulate(uni, u, Eigen::Vector3d(0, 0, 0.3));
  const auto stm = controlled_stm(uni, u, traj);
  CHECK(max_diff(oracle::forward_stm(uni, u, traj), stm.matrices) < 1e-7);
  // A_u has only the theta column, so R - I is supported on that column.
  for (const auto& R : stm.matrices.values) {
    CHECK((R.leftCols(2) - Matrix::Identity(3, 2)).norm() < 1e-12);
    CHECK(R(2, 2) == doctest::Approx(1.0));
  }
}

TEST_CASE("controlled_stm: backward and forward constructions agree on builtin models") {
  const TimeGrid g(0, 2, 401);
  struct Case {
    SystemModel sys;
    Vector x0;
    std::function<Vector(double)> u;
  };
  const std::vector<Case> cases = {
      {make_pendulum(), Eigen::Vector2d(0.5, -0.2), [](double t) { return Vector::Constant(1, std::sin(2 * t)); }},
      {make_rnn(), Eigen::Vector3d(0.1, -0.3, 0.4),
       [](double t) { return Eigen::Vector3d(t, -1, std::cos(t)).eval(); }},
      {make_unicycle(), Eigen::Vector3d(0, 0, 0), [](double t) { return Eigen::Vector2d(1 - t, 0.5 + t).eval(); }},
      {make_double_integrator(), Eigen::Vector2d(0, 0), [](double t) { return Vector::Constant(1, 6 - 12 * t); }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.sys.name);
    const auto u = ControlSignal::sample(g, c.u);
    const auto traj = simulate(c.sys, u, c.x0);
    CHECK(max_diff(oracle::forward_stm(c.sys, u, traj), controlled_stm(c.sys, u, traj).matrices) < 1e-7);
  }
}

TEST_CASE("controlled_stm: semigroup on subintervals") {
  const SystemModel pend = make_pendulum();
  const TimeGrid g(0, 2, 201);
  const auto u = ControlSignal::sample(g, [](double t) { return Vector::Constant(1, 1 - t); });
  const auto traj = simulate(pend, u, Eigen::Vector2d(0.3, 0.1));
  const auto stm = controlled_stm(pend, u, traj);
  const auto fwd = oracle::forward_stm(pend, u, traj);
  // R(T, t_j) = R(T, t_l) R(t_l, t_j), with R(t_l, t_j) = R(T, t_l)^-1 R(T, t_j) from the oracle.
  for (std::size_t j : {0u, 40u, 77u}) {
    const std::size_t l = 150;
    const Matrix sub = fwd[l].inverse() * fwd[j];
    CHECK((stm[j] - stm[l] * sub).norm() < 1e-7);
  }
}

TEST_CASE("controlled_stm rejects mismatched grids") {
  const SystemModel pend = make_pendulum();
  const auto u = ControlSignal::zero(TimeGrid(0, 1, 11), 1);
  const auto traj = simulate(pend, ControlSignal::zero(TimeGrid(0, 1, 21), 1), Vector::Zero(2));
  try {
    controlled_stm(pend, u, traj);
    FAIL("expected grid error");
  } catch (const SteerError& e) {
    CHECK(e.kind() == ErrorKind::kGrid);
  }
}

TEST_CASE("flow_jacobian_field examples") {
  const TimeGrid g(0, 1, 101);
  const SystemModel uni = make_unicycle();
  const auto tu = simulate(uni, ControlSignal::constant(g, Eigen::Vector2d(1, 1)), Vector::Zero(3));
  for (Anchor a : {Anchor::kInitial, Anchor::kFinal}) {
    const auto f = flow_jacobian_field(uni, tu, a);
    for (const auto& J : f.matrices.values) CHECK((J - Matrix::Identity(3, 3)).norm() == 0.0);
  }

  const SystemModel lin = make_linear(damped(), Eigen::Vector2d(0, 1));
  const auto tl = simulate(lin, ControlSignal::zero(g, 1), Eigen::Vector2d(1, 0));
  const auto fT = flow_jacobian_field(lin, tl, Anchor::kFinal);
  const auto f0 = flow_jacobian_field(lin, tl, Anchor::kInitial, 3);
  CHECK((fT.matrices.back() - Matrix::Identity(2, 2)).norm() == 0.0);
  CHECK((f0[0] - Matrix::Identity(2, 2)).norm() == 0.0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK((fT[j] - oracle::expm(damped() * (g.T() - g.node(j)))).norm() < 1e-8);
    CHECK((f0[j] - oracle::expm(damped() * (g.t0() - g.node(j)))).norm() < 1e-8);
  }
}

TEST_CASE("flow_jacobian_field is independent of the worker count") {
  const TimeGrid g(0, 2, 101);
  const SystemModel pend = make_pendulum();
  const auto traj = simulate(pend, ControlSignal::constant(g, Vector::Ones(1)), Eigen::Vector2d(0.1, 0));
  const auto a = flow_jacobian_field(pend, traj, Anchor::kFinal, 1);
  const auto b = flow_jacobian_field(pend, traj, Anchor::kFinal, 4);
  for (std::size_t j = 0; j < g.size(); ++j) CHECK((a[j] - b[j]).norm() == 0.0);
}

TEST_CASE("adjoint_rows examples") {
  const TimeGrid g(0, 1, 101);
  const Matrix B = Eigen::Vector2d(0, 1);
  const SystemModel lin = make_linear(damped(), B);
  const auto u = ControlSignal::zero(g, 1);
  const auto traj = simulate(lin, u, Vector::Zero(2));
  const auto stm = controlled_stm(lin, u, traj);
  const auto rows = adjoint_rows(lin, traj, stm, flow_jacobian_field(lin, traj, Anchor::kFinal));
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Matrix expect = B.transpose() * oracle::expm(damped().transpose() * (g.T() - g.node(j)));
    CHECK((rows.L_rows[j] - expect).norm() < 1e-8);
    CHECK((rows.DF_rows[j] - expect).norm() < 1e-8);
    CHECK((rows.DF_rows[j] - B.transpose() * stm[j].transpose()).norm() < 1e-15);
  }

  const SystemModel uni = make_unicycle();
  const auto uu = ControlSignal::sample(g, [](double t) { return Eigen::Vector2d(1, t).eval(); });
  const auto tu = simulate(uni, uu, Vector::Zero(3));
  const auto ru = adjoint_rows(uni, tu, controlled_stm(uni, uu, tu), flow_jacobian_field(uni, tu, Anchor::kFinal));
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK((ru.L_rows[j] - uni.input(g.node(j), tu[j]).transpose()).norm() == 0.0);
  }
}

TEST_CASE("apply_L examples") {
  const TimeGrid g(0, 1, 401);
  const SystemModel di = make_double_integrator();
  const auto zero = ControlSignal::zero(g, 1);
  const auto traj = simulate(di, zero, Vector::Zero(2));
  const auto dphi = flow_jacobian_field(di, traj, Anchor::kFinal);
  CHECK(apply_L(di, traj, dphi, zero).norm() == 0.0);
  const auto v = ControlSignal::sample(g, [](double t) { return Vector::Constant(1, 6 - 12 * t); });
  CHECK((apply_L(di, traj, dphi, v) - Eigen::Vector2d(1, 0)).norm() < 1e-6);
}

TEST_CASE("variation-of-constants representation of the endpoint") {
  const TimeGrid g(0, 2, 401);
  const SystemModel pend = make_pendulum();
  const auto u = ControlSignal::sample(g, [](double t) { return Vector::Constant(1, 2 * std::cos(t)); });
  const Vector x0(Eigen::Vector2d(0.4, 0));
  const auto traj = simulate(pend, u, x0);
  const std::size_t steps = g.size() - 1;
  for (Anchor a : {Anchor::kFinal, Anchor::kInitial}) {
    const double tau = a == Anchor::kFinal ? g.T() : g.t0();
    const auto dphi = flow_jacobian_field(pend, traj, a);
    const Vector inner = flow_map(pend, g.t0(), tau, x0, steps) + apply_L(pend, traj, dphi, u);
    const Vector rep = flow_map(pend, tau, g.T(), inner, steps);
    CHECK((rep - traj.endpoint()).norm() < 1e-6);
  }
}

TEST_CASE("feasibility_residual examples") {
  const TimeGrid g(0, 1, 401);
  const SystemModel uni = make_unicycle();
  const auto u = ControlSignal::constant(g, Eigen::Vector2d(1, 0));
  const auto traj = simulate(uni, u, Vector::Zero(3));
  const TransferProblem exact{Vector::Zero(3), Eigen::Vector3d(1, 0, 0), g, Anchor::kFinal};
  CHECK(feasibility_residual(uni, u, traj, flow_jacobian_field(uni, traj, Anchor::kFinal), exact).norm() < 1e-12);

  const SystemModel pend = make_pendulum();
  const TransferProblem pp{Eigen::Vector2d(0.5, 0), Eigen::Vector2d(1, 0), g, Anchor::kFinal};
  const Vector y = transfer_target(pend, pp);
  CHECK((y - (pp.x1 - flow_map(pend, 0, 1, pp.x0, g.size() - 1))).norm() < 1e-15);

  const Matrix A = damped();
  const Matrix B = Eigen::Vector2d(0, 1);
  const SystemModel lin = make_linear(A, B);
  const auto v = ControlSignal::sample(g, [](double t) { return Vector::Constant(1, t * t - 1); });
  const auto tl = simulate(lin, v, Eigen::Vector2d(1, 0));
  const TransferProblem lp{Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 2), g, Anchor::kFinal};
  // int_0^1 e^{A(1-t)} B (t^2 - 1) dt by a fine independent quadrature.
  Vector integral = Vector::Zero(2);
  const int panels = 4000;
  for (int p = 0; p < panels; ++p) {
    const double t = (p + 0.5) / panels;
    integral += oracle::expm(A * (1 - t)) * B * (t * t - 1) / panels;
  }
  const Vector expect = integral - (lp.x1 - oracle::expm(A) * lp.x0);
  CHECK((feasibility_residual(lin, v, tl, flow_jacobian_field(lin, tl, Anchor::kFinal), lp) - expect).norm() < 1e-7);
}

TEST_CASE("chain identity: DF rows match finite differences of the pulled-back endpoint") {
  const TimeGrid g(0, 2, 401);
  const SystemModel pend = make_pendulum();
  const auto u = ControlSignal::sample(g, [](double t) { return Vector::Constant(1, 1.5 * std::sin(t)); });
  const auto dir = ControlSignal::sample(g, [](double t) { return Vector::Constant(1, std::exp(-t) * std::cos(3 * t)); });
  const Vector x0(Eigen::Vector2d(0.2, -0.1));
  for (Anchor a : {Anchor::kFinal, Anchor::kInitial}) {
    const double tau = a == Anchor::kFinal ? g.T() : g.t0();
    const auto traj = simulate(pend, u, x0);
    const auto rows = adjoint_rows(pend, traj, controlled_stm(pend, u, traj), flow_jacobian_field(pend, traj, a));
    std::vector<Vector> action;
    for (std::size_t j = 0; j < g.size(); ++j) action.push_back(rows.DF_rows[j].transpose() * dir[j]);
    const Vector analytic = composite_quadrature(VectorField(g, action));

    const double eps = 1e-4;
    const auto pulled = [&](double s) {
      std::vector<Vector> w;
      for (std::size_t j = 0; j < g.size(); ++j) w.push_back(u[j] + s * dir[j]);
      const Vector xT = simulate(pend, ControlSignal(g, w), x0).endpoint();
      return flow_map(pend, g.T(), tau, xT, g.size() - 1);
    };
    const Vector fd = (pulled(eps) - pulled(-eps)) / (2 * eps);
    CHECK((fd - analytic).norm() < 1e-6 * (1 + analytic.norm()));
  }
}

TEST_CASE("apply_endpoint_differential equals the DF row action at tau = T") {
  const TimeGrid g(0, 1, 201);
  const SystemModel rnn = make_rnn();
  const auto u = ControlSignal::constant(g, Eigen::Vector3d(1, 0, -1));
  const auto v = ControlSignal::sample(g, [](double t) { return Eigen::Vector3d(t, 1, -t * t).eval(); });
  const auto traj = simulate(rnn, u, Vector::Zero(3));
  const auto stm = controlled_stm(rnn, u, traj);
  const auto rows = adjoint_rows(rnn, traj, stm, flow_jacobian_field(rnn, traj, Anchor::kFinal));
  std::vector<Vector> action;
  for (std::size_t j = 0; j < g.size(); ++j) action.push_back(rows.DF_rows[j].transpose() * v[j]);
  CHECK((apply_endpoint_differential(rnn, traj, stm, v) - composite_quadrature(VectorField(g, action))).norm() < 1e-13);
}

TEST_CASE("STM norm bound holds for builtin models") {
  const TimeGrid g(0, 2, 201);
  const std::vector<std::pair<SystemModel, std::function<Vector(double)>>> cases = {
      {make_pendulum(), [](double t) { return Vector::Constant(1, 3 * std::sin(t)); }},
      {make_rnn(), [](double t) { return Eigen::Vector3d(2, -t, 1).eval(); }},
      {make_unicycle(), [](double t) { return Eigen::Vector2d(1.5, 2 * std::cos(t)).eval(); }},
  };
  for (const auto& [sys, f] : cases) {
    CAPTURE(sys.name);
    REQUIRE(sys.bounds.has_value());
    const auto u = ControlSignal::sample(g, f);
    const auto traj = simulate(sys, u, Vector::Constant(sys.d, 0.2));
    const auto stm = controlled_stm(sys, u, traj);
    const double rate = sys.bounds->lambda1 + sys.bounds->l_b * u.sup_norm();
    for (std::size_t j = 0; j < g.size(); ++j) {
      Eigen::JacobiSVD<Matrix> svd(stm[j]);
      CHECK(svd.singularValues()[0] <= std::exp(rate * (g.T() - g.node(j))) + 1e-6);
    }
  }
}
