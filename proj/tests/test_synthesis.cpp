#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "steer/flow.hpp"
#include "steer/synthesis.hpp"

using namespace steer;

namespace {

constexpr double kPi = std::numbers::pi;

TransferProblem di_problem(std::size_t n = 401) {
  return {Vector::Zero(2), Eigen::Vector2d(1, 0), TimeGrid(0, 1, n), Anchor::kFinal};
}

double max_dev(const ControlSignal& u, const std::function<double(double)>& f) {
  double m = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) m = std::max(m, std::abs(u[j][0] - f(u.grid().node(j))));
  return m;
}

TransferProblem unicycle_problem() {
  return {Vector::Zero(3), Eigen::Vector3d(0.5, 0.5, kPi / 2), TimeGrid(0, 1, 401), Anchor::kFinal};
}

ControlSignal unicycle_seed(const TransferProblem& p) {
  return ControlSignal::constant(p.grid, Eigen::Vector2d(0, (p.x1[2] - p.x0[2]) / p.grid.horizon()));
}

}  // namespace

TEST_CASE("double integrator: both maps give the classical control 6 - 12t") {
  const auto di = make_double_integrator();
  const auto p = di_problem();
  const auto any = ControlSignal::sample(p.grid, [](double t) { return Vector::Constant(1, std::sin(5 * t)); });
  for (const auto& u : {ControlSignal::zero(p.grid, 1), any}) {
    CHECK(max_dev(evaluate_S(di, p, u), [](double t) { return 6 - 12 * t; }) < 1e-9);
    CHECK(max_dev(evaluate_Z(di, p, u), [](double t) { return 6 - 12 * t; }) < 1e-9);
  }
  for (Method m : {Method::kMinEnergy, Method::kGramian}) {
    const auto r = picard_solve(m, di, p, ControlSignal::zero(p.grid, 1));
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK(r.terminal_error <= 1e-8);
    CHECK(r.energy == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(std::abs(2 * r.energy - *r.certificate) <= 1e-6 * (1 + *r.certificate));
    CHECK((r.multiplier - Eigen::Vector2d(12, -6)).norm() < 1e-8);
  }
}

TEST_CASE("zero target gives the zero control") {
  const auto pend = make_pendulum();
  const TimeGrid g(0, 2, 201);
  const Vector x0(Eigen::Vector2d(0.4, 0.1));
  const Vector x1 = flow_map(pend, 0, 2, x0, g.size() - 1);
  const TransferProblem p{x0, x1, g, Anchor::kFinal};
  const auto u0 = ControlSignal::zero(g, 1);
  CHECK(evaluate_S(pend, p, u0).sup_norm() < 1e-12);
  CHECK(evaluate_Z(pend, p, u0).sup_norm() < 1e-12);
  const auto z = picard_solve(Method::kMinEnergy, pend, p, u0);
  const auto s = picard_solve(Method::kGramian, pend, p, u0);
  CHECK(z.iterations == 1);
  CHECK(z.energy == 0.0);
  CHECK(s.energy == 0.0);
  CHECK(energy_gap(z, s) == 0.0);
}

TEST_CASE("LTI: energy gap vanishes") {
  Matrix A(2, 2);
  A << 0, 1, -1, -0.5;
  const auto lin = make_linear(A, Eigen::Vector2d(0, 1));
  const TransferProblem p{Eigen::Vector2d(1, 0), Eigen::Vector2d(-0.5, 1), TimeGrid(0, 2, 401), Anchor::kInitial};
  const auto z = picard_solve(Method::kMinEnergy, lin, p, ControlSignal::zero(p.grid, 1));
  const auto s = picard_solve(Method::kGramian, lin, p, ControlSignal::zero(p.grid, 1));
  CHECK(std::abs(energy_gap(z, s)) < 1e-9);
  CHECK(z.terminal_error < 1e-8);
}

TEST_CASE("pendulum transfer: fixed points, steering and energy ordering") {
  const auto pend = make_pendulum();
  for (Anchor a : {Anchor::kFinal, Anchor::kInitial}) {
    CAPTURE(static_cast<int>(a));
    const TransferProblem p{Vector::Zero(2), Eigen::Vector2d(kPi / 2, 0), TimeGrid(0, 2, 401), a};
    SynthesisOptions opt;
    const auto z = picard_solve(Method::kMinEnergy, pend, p, ControlSignal::zero(p.grid, 1), opt);
    const auto s = picard_solve(Method::kGramian, pend, p, ControlSignal::zero(p.grid, 1), opt);
    CHECK(energy_gap(z, s) >= -1e-9);
    CHECK(z.terminal_error <= 1e-6);
    CHECK(s.terminal_error <= 1e-6);
    CHECK(std::abs(2 * z.energy - *z.certificate) <= 1e-6 * (1 + *z.certificate));
    CHECK(*z.certificate >= 0.0);
    CHECK(sup_distance(z.control, evaluate_Z(pend, p, z.control, opt)) <= 2 * opt.tol);
    CHECK(sup_distance(s.control, evaluate_S(pend, p, s.control, opt)) <= 2 * opt.tol);
    for (const auto* r : {&z, &s}) {
      const auto dphi = flow_jacobian_field(pend, r->trajectory, a);
      CHECK(feasibility_residual(pend, r->control, r->trajectory, dphi, p).norm() < 1e-8);
      CHECK(r->residuals.size() == static_cast<std::size_t>(r->iterations) + 1);
      CHECK(r->feasibility_history.size() == r->residuals.size());
      double running = 0.0;
      for (double amp : r->amplitude_history) {
        CHECK(std::isfinite(amp));
        running = std::max(running, amp);
      }
      CHECK(r->sup_norm <= running);
      CHECK_FALSE(r->coercivity_dip);
    }
  }
}

TEST_CASE("unicycle: angular component and steering") {
  const auto uni = make_unicycle();
  const auto p = unicycle_problem();
  const auto s = picard_solve(Method::kGramian, uni, p, unicycle_seed(p));
  for (const auto& v : s.control.values()) CHECK(std::abs(v[1] - (kPi / 2) / 1.0) < 1e-8);
  const auto z = picard_solve(Method::kMinEnergy, uni, p, unicycle_seed(p));
  CHECK(z.terminal_error < 1e-6);
  CHECK(s.terminal_error < 1e-6);
  CHECK(energy_gap(z, s) >= -1e-9);
}

TEST_CASE("unicycle with a zero heading seed violates coercivity") {
  const auto uni = make_unicycle();
  const TransferProblem p{Vector::Zero(3), Eigen::Vector3d(1, 1, 0), TimeGrid(0, 1, 201), Anchor::kFinal};
  try {
    picard_solve(Method::kGramian, uni, p, ControlSignal::zero(p.grid, 2));
    FAIL("expected coercivity error");
  } catch (const CoercivityError& e) {
    CHECK(e.kind() == ErrorKind::kCoercivity);
    CHECK(std::abs(e.lambda_min()) < 1e-12);
  }
  CHECK_THROWS_AS(evaluate_S(uni, p, ControlSignal::zero(p.grid, 2)), CoercivityError);
  try {
    evaluate_Z(uni, p, ControlSignal::zero(p.grid, 2));
    FAIL("expected singular Gramian");
  } catch (const SteerError& e) {
    CHECK(e.kind() == ErrorKind::kSingularGramian);
  }
}

TEST_CASE("non-convergence carries the partial report") {
  const auto pend = make_pendulum();
  const TransferProblem p{Vector::Zero(2), Eigen::Vector2d(1, 0), TimeGrid(0, 2, 201), Anchor::kFinal};
  SynthesisOptions opt;
  opt.max_iter = 2;
  try {
    picard_solve(Method::kMinEnergy, pend, p, ControlSignal::zero(p.grid, 1), opt);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.kind() == ErrorKind::kNonConvergence);
    CHECK_FALSE(e.report().converged);
    CHECK(e.report().residuals.size() == 3);
    CHECK(e.report().residuals.back() > opt.tol);
  }
}

TEST_CASE("energy_gap rejects mismatched reports") {
  const auto di = make_double_integrator();
  const auto z = picard_solve(Method::kMinEnergy, di, di_problem(401), ControlSignal::zero(TimeGrid(0, 1, 401), 1));
  const auto s = picard_solve(Method::kGramian, di, di_problem(201), ControlSignal::zero(TimeGrid(0, 1, 201), 1));
  for (const auto& [a, b] : {std::pair{&z, &s}, std::pair{&z, &z}}) {
    try {
      energy_gap(*a, *b);
      FAIL("expected comparison error");
    } catch (const SteerError& e) {
      CHECK(e.kind() == ErrorKind::kComparison);
    }
  }
}

TEST_CASE("minimality surrogate: feasible perturbations do not lower the energy") {
  const auto pend = make_pendulum();
  const TransferProblem p{Vector::Zero(2), Eigen::Vector2d(kPi / 2, 0), TimeGrid(0, 2, 201), Anchor::kFinal};
  const auto best = picard_solve(Method::kMinEnergy, pend, p, ControlSignal::zero(p.grid, 1));
  const auto lin = linearize(pend, p, best.control);
  const TimeGrid& g = p.grid;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;

  // Removes the component of eta in the range of DF*, using the M-weighted projection.
  const auto project = [&](const Linearization& l, std::vector<Vector> eta) {
    std::vector<Vector> act;
    for (std::size_t j = 0; j < g.size(); ++j) act.push_back(l.rows.DF_rows[j].transpose() * eta[j]);
    const Vector c = l.gramians.M.ldlt().solve(composite_quadrature(VectorField(g, act)));
    for (std::size_t j = 0; j < g.size(); ++j) eta[j] -= l.rows.DF_rows[j] * c;
    return eta;
  };

  for (int trial = 0; trial < 20; ++trial) {
    // Smooth random direction: a few random Fourier modes.
    double a[4];
    for (double& x : a) x = n01(rng);
    std::vector<Vector> eta;
    for (double t : g.nodes()) {
      eta.push_back(Vector::Constant(1, a[0] * std::sin(t) + a[1] * std::cos(2 * t) + a[2] * std::sin(3 * t) + a[3]));
    }
    eta = project(lin, eta);
    std::vector<Vector> w;
    for (std::size_t j = 0; j < g.size(); ++j) w.push_back(best.control[j] + 0.2 * eta[j]);
    ControlSignal ws(g, w);
    // One Newton correction back onto the endpoint constraint.
    const auto lw = linearize(pend, p, ws);
    const Vector miss = p.x1 - lw.trajectory.endpoint();
    const Vector c = lw.gramians.M.ldlt().solve(miss);
    for (std::size_t j = 0; j < g.size(); ++j) w[j] += lw.rows.DF_rows[j] * c;
    ws = ControlSignal(g, w);
    CHECK((simulate(pend, ws, p.x0).endpoint() - p.x1).norm() < 1e-3);
    CHECK(ws.energy() >= best.energy - 1e-8);
  }
}

TEST_CASE("full-actuation FL baseline") {
  const auto rnn = make_rnn();
  const TransferProblem p{Vector::Zero(3), Eigen::Vector3d(1, -1, 0.5), TimeGrid(0, 1, 401), Anchor::kFinal};
  const auto fl = baseline_fl_full(rnn, p);
  CHECK(fl.method == Method::kBaselineFl);
  CHECK(fl.terminal_error < 1e-8);
  for (std::size_t j = 0; j < p.grid.size(); ++j) {
    const Vector line = p.x0 + p.grid.node(j) * (p.x1 - p.x0);
    CHECK((fl.trajectory[j] - line).norm() < 1e-6);
  }
  const auto z = picard_solve(Method::kMinEnergy, rnn, p, ControlSignal::zero(p.grid, 3));
  CHECK(fl.energy > z.energy);

  const TransferProblem hold{Eigen::Vector3d(0.2, 0.1, -0.3), Eigen::Vector3d(0.2, 0.1, -0.3), p.grid, Anchor::kFinal};
  const auto h = baseline_fl_full(rnn, hold);
  for (std::size_t j = 0; j < p.grid.size(); ++j) {
    CHECK((h.trajectory[j] - hold.x0).norm() < 1e-12);
    CHECK((h.control[j] + rnn.drift(p.grid.node(j), hold.x0)).norm() < 1e-12);
  }

  Matrix B = Matrix::Identity(2, 2);
  B(1, 1) = 0.0;
  const auto sing = make_linear(Matrix::Zero(2, 2), B);
  try {
    baseline_fl_full(sing, {Vector::Zero(2), Vector::Ones(2), TimeGrid(0, 1, 11), Anchor::kFinal});
    FAIL("expected singular input");
  } catch (const SteerError& e) {
    CHECK(e.kind() == ErrorKind::kSingularInput);
  }
}

TEST_CASE("pendulum FL baseline") {
  CHECK(double_integrator_control(0, 1, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 0.25) ==
        doctest::Approx(6 - 12 * 0.25).epsilon(1e-12));
  CHECK(double_integrator_control(0, 1, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 1.0) ==
        doctest::Approx(-6).epsilon(1e-12));

  const TransferProblem rest{Vector::Zero(2), Vector::Zero(2), TimeGrid(0, 2, 101), Anchor::kFinal};
  const auto r = baseline_fl_pendulum(rest, PendulumParams{});
  CHECK(r.control.sup_norm() == 0.0);

  const auto pend = make_pendulum();
  for (const auto& [T, target] : {std::pair{2.0, kPi / 2}, std::pair{3.0, kPi}}) {
    const TransferProblem p{Vector::Zero(2), Eigen::Vector2d(target, 0), TimeGrid(0, T, 401), Anchor::kFinal};
    const auto fl = baseline_fl_pendulum(p, PendulumParams{});
    CHECK(fl.terminal_error <= 1e-6);
    const auto z = picard_solve(Method::kMinEnergy, pend, p, ControlSignal::zero(p.grid, 1));
    CHECK(fl.energy >= z.energy);
  }
}

TEST_CASE("unicycle FL baseline") {
  const TimeGrid g(0, 1, 401);
  const auto straight = baseline_fl_unicycle({Vector::Zero(3), Eigen::Vector3d(1, 0, 0), g, Anchor::kFinal});
  CHECK(straight.terminal_error < 1e-6);
  for (const auto& v : straight.control.values()) {
    CHECK(v[0] > 0.0);
    CHECK(std::abs(v[1]) < 1e-12);
  }

  try {
    baseline_fl_unicycle({Vector::Zero(3), Eigen::Vector3d(0, 0, 1), g, Anchor::kFinal});
    FAIL("expected flatness singularity");
  } catch (const SteerError& e) {
    CHECK(e.kind() == ErrorKind::kSingularInput);
  }

  const auto p = unicycle_problem();
  const auto fl = baseline_fl_unicycle(p);
  CHECK(fl.terminal_error < 1e-6);
  const auto uni = make_unicycle();
  const auto z = picard_solve(Method::kMinEnergy, uni, p, unicycle_seed(p));
  const auto s = picard_solve(Method::kGramian, uni, p, unicycle_seed(p));
  CHECK(fl.energy > z.energy);
  CHECK(fl.energy > s.energy);
}
