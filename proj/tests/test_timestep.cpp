#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <deque>

#include "helpers.hpp"
#include "lrme/timestep.hpp"

using namespace lrme;
using namespace lrme::test;

namespace {

std::vector<std::pair<SpMat, SpMat>> heat_terms(Index n) {
  SpMat lap = laplacian_1d(n);
  return {{lap, sparse_identity(n)}, {sparse_identity(n), lap}};
}

Eigen::MatrixXd dense_of_terms(const std::vector<std::pair<SpMat, SpMat>>& ts,
                               Index n) {
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n * n, n * n);
  for (const auto& [a, b] : ts)
    sys += kron_dense(Eigen::MatrixXd(b), Eigen::MatrixXd(a));
  return sys;
}

// Smooth boundary-compatible rank-1 state sin(pi x) sin(pi y).
FactoredMatrix sine_state(Index n) {
  Grid g = Grid::square(n);
  Eigen::MatrixXd x(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      x(i, j) = std::sin(M_PI * g.x(i)) * std::sin(M_PI * g.y(j));
  return truncated_svd(x, 0.0);
}

FactoredMatrix apply_terms_lr(const std::vector<std::pair<SpMat, SpMat>>& ts,
                              const FactoredMatrix& x) {
  MultitermOperator op;
  op.terms = ts;
  return apply_lowrank(op, x, 0.0);
}

TolerancePolicy tight_policy() {
  TolerancePolicy p;
  p.eps = 1e-11;
  p.eps2 = 1e-10;
  p.delta = 1e-9;
  return p;
}

ImplicitStepSolver make_solver(const std::vector<std::pair<SpMat, SpMat>>& ts,
                               double dt_coef, const TolerancePolicy& p) {
  return ImplicitStepSolver(ts, dt_coef, PrecondChoice::None, nullptr, p, 30,
                            30, 1);
}

}  // namespace

TEST_CASE("crouzeix4 tableau satisfies the order conditions") {
  DirkTableau t = DirkTableau::crouzeix4();
  REQUIRE(t.b.size() == 3);
  CHECK(t.order == 4);
  const auto& b = t.b;
  const auto& c = t.c;
  CHECK(std::abs(b.sum() - 1.0) <= 1e-14);
  CHECK(std::abs(b.dot(c) - 0.5) <= 1e-14);
  CHECK(std::abs(b.dot(c.cwiseProduct(c)) - 1.0 / 3.0) <= 1e-14);
  CHECK(std::abs(b.dot(c.cwiseProduct(c.cwiseProduct(c))) - 0.25) <= 1e-14);
  for (Index i = 0; i < 3; ++i) {
    CHECK(t.a(i, i) > 0.0);
    CHECK(std::abs(t.a.row(i).sum() - c(i)) <= 1e-14);  // row-sum condition
    for (Index j = i + 1; j < 3; ++j) CHECK(t.a(i, j) == 0.0);
  }
  const double gamma = 0.5 + std::cos(M_PI / 18.0) / std::sqrt(3.0);
  CHECK(t.a(0, 0) == doctest::Approx(gamma).epsilon(1e-14));
  CHECK(c(1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("backward_euler tableau is the 1-stage implicit Euler") {
  DirkTableau t = DirkTableau::backward_euler();
  REQUIRE(t.b.size() == 1);
  CHECK(t.a(0, 0) == 1.0);
  CHECK(t.b(0) == 1.0);
  CHECK(t.c(0) == 1.0);
  CHECK(t.order == 1);
}

TEST_CASE("BDF coefficients satisfy the multistep order conditions") {
  for (int l : {1, 2, 3, 4}) {
    SchemeSpec s = SchemeSpec::bdf(l);
    REQUIRE(s.bdf_alpha.size() == l);
    // Exactness on y = t^q, q = 0..l, with t^{n+1} = 0 and history at -(1+j):
    // 0^q = sum_j alpha_j (-(1+j))^q + beta * (d/dt t^q)|_0.
    for (int q = 0; q <= l; ++q) {
      double sum = 0.0;
      for (int j = 0; j < l; ++j)
        sum += s.bdf_alpha(j) * std::pow(-(1.0 + j), q);
      const double lhs = (q == 0) ? 1.0 : 0.0;
      const double deriv = (q == 1) ? s.bdf_beta : 0.0;
      CHECK(std::abs(lhs - sum - deriv) <= 1e-13);
    }
  }
  SchemeSpec b4 = SchemeSpec::bdf(4);
  CHECK(b4.bdf_beta == doctest::Approx(12.0 / 25.0).epsilon(1e-15));
  CHECK(b4.bdf_alpha(0) == doctest::Approx(48.0 / 25.0).epsilon(1e-15));
  CHECK(b4.bdf_alpha(3) == doctest::Approx(-3.0 / 25.0).epsilon(1e-15));
  CHECK(b4.order == 4);
}

TEST_CASE("tolerance_for implements the accuracy-matched powers") {
  const double h = 7.81e-3;
  TolerancePolicy p2 = tolerance_for(h, 2);
  CHECK(p2.eps == doctest::Approx(h * h * h).epsilon(1e-15));
  CHECK(p2.eps2 == doctest::Approx(h * h).epsilon(1e-15));
  CHECK(p2.delta == p2.eps);

  TolerancePolicy p4 = tolerance_for(1.56e-2, 4);
  CHECK(p4.eps == doctest::Approx(std::pow(1.56e-2, 5)).epsilon(1e-15));
  CHECK(p4.eps2 == doctest::Approx(std::pow(1.56e-2, 4)).epsilon(1e-15));

  TolerancePolicy p1 = tolerance_for(1.0, 2);
  CHECK(p1.eps == 1.0);
  CHECK_THROWS_AS(tolerance_for(0.1, 3), std::invalid_argument);
}

TEST_CASE("resolve_policy honors overrides and scales") {
  RunOptions opt;
  const double h = 0.1;
  TolerancePolicy base = tolerance_for(h, 2);
  TolerancePolicy p = resolve_policy(h, 2, opt);
  CHECK(p.eps == base.eps);
  CHECK(p.delta == base.delta);

  opt.eps = 1e-5;
  opt.eps2_scale = 2.0;
  p = resolve_policy(h, 2, opt);
  CHECK(p.eps == doctest::Approx(1e-5));
  CHECK(p.eps2 == doctest::Approx(2.0 * base.eps2));

  opt.delta = 1e-3;
  p = resolve_policy(h, 2, opt);
  CHECK(p.delta == doctest::Approx(1e-3));
}

TEST_CASE("step_midpoint fixed point on a stationary solution") {
  const Index n = 16;
  auto ts = heat_terms(n);
  FactoredMatrix x = sine_state(n);
  // G = -L(X) makes X stationary.
  FactoredMatrix g = round_sum({{-1.0, apply_terms_lr(ts, x)}}, 0.0);
  TolerancePolicy p = tight_policy();
  const double dt = 0.05;
  ImplicitStepSolver solver = make_solver(ts, dt * 0.5, p);
  StepResult r = step_midpoint(x, ts, g, dt, 0.5, p, solver);
  CHECK(r.report.converged);
  CHECK((to_dense(r.x) - to_dense(x)).norm() <= 10.0 * p.eps2);
}

TEST_CASE("step_midpoint matches the dense vectorized direct solve") {
  const Index n = 16;
  auto ts = heat_terms(n);
  FactoredMatrix x = sine_state(n);
  FactoredMatrix g = random_factored(n, n, 2, 3);
  TolerancePolicy p = tight_policy();
  const double dt = 0.02;
  ImplicitStepSolver solver = make_solver(ts, dt * 0.5, p);
  StepResult r = step_midpoint(x, ts, g, dt, 0.5, p, solver);
  REQUIRE(r.report.converged);

  Eigen::MatrixXd l = dense_of_terms(ts, n);
  Eigen::MatrixXd sys =
      Eigen::MatrixXd::Identity(n * n, n * n) - dt * 0.5 * l;
  Eigen::VectorXd rhs = vec(to_dense(x)) + dt * (0.5 * l * vec(to_dense(x)) +
                                                 vec(to_dense(g)));
  Eigen::VectorXd oracle = sys.lu().solve(rhs);
  CHECK((to_dense(r.x) - unvec(oracle, n, n)).norm() <= 1e-7);
}

TEST_CASE("step_midpoint is time-symmetric on the autonomous problem") {
  const Index n = 14;
  auto ts = heat_terms(n);
  FactoredMatrix x = sine_state(n);
  TolerancePolicy p = tight_policy();
  const double dt = 0.03;
  FactoredMatrix g0 = FactoredMatrix::zero(n, n);
  ImplicitStepSolver fwd = make_solver(ts, dt * 0.5, p);
  ImplicitStepSolver bwd = make_solver(ts, -dt * 0.5, p);
  StepResult r1 = step_midpoint(x, ts, g0, dt, 0.5, p, fwd);
  StepResult r2 = step_midpoint(r1.x, ts, g0, -dt, 0.5, p, bwd);
  CHECK((to_dense(r2.x) - to_dense(x)).norm() <= 10.0 * (p.eps + p.eps2));
}

TEST_CASE("step_bdf reproduces constants and matches backward Euler oracles") {
  const Index n = 16;
  auto ts = heat_terms(n);
  FactoredMatrix x = sine_state(n);
  TolerancePolicy p = tight_policy();
  const double dt = 0.02;

  // Constant-in-time solution via G = -L(X); BDF4 should return X.
  SchemeSpec b4 = SchemeSpec::bdf(4);
  FactoredMatrix g = round_sum({{-1.0, apply_terms_lr(ts, x)}}, 0.0);
  std::deque<FactoredMatrix> states(4, x);
  ImplicitStepSolver s4 = make_solver(ts, dt * b4.bdf_beta, p);
  StepResult rc = step_bdf(states, ts, g, dt, b4, p, s4);
  CHECK(rc.report.converged);
  CHECK((to_dense(rc.x) - to_dense(x)).norm() <= 10.0 * p.eps2);

  // BDF1 = backward Euler vs the dense direct solve.
  SchemeSpec b1 = SchemeSpec::bdf(1);
  FactoredMatrix g2 = random_factored(n, n, 2, 4);
  std::deque<FactoredMatrix> one{x};
  ImplicitStepSolver s1 = make_solver(ts, dt * b1.bdf_beta, p);
  StepResult re = step_bdf(one, ts, g2, dt, b1, p, s1);
  REQUIRE(re.report.converged);
  Eigen::MatrixXd l = dense_of_terms(ts, n);
  Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(n * n, n * n) - dt * l;
  Eigen::VectorXd oracle =
      sys.lu().solve(vec(to_dense(x)) + dt * vec(to_dense(g2)));
  CHECK((to_dense(re.x) - unvec(oracle, n, n)).norm() <= 1e-7);
}

TEST_CASE("1-stage DIRK with the backward-Euler tableau matches step_bdf") {
  const Index n = 14;
  auto ts = heat_terms(n);
  FactoredMatrix x = sine_state(n);
  FactoredMatrix g = random_factored(n, n, 2, 5);
  TolerancePolicy p = tight_policy();
  const double dt = 0.02;
  ImplicitStepSolver solver = make_solver(ts, dt, p);

  SchemeSpec b1 = SchemeSpec::bdf(1);
  std::deque<FactoredMatrix> one{x};
  StepResult rb = step_bdf(one, ts, g, dt, b1, p, solver);

  DirkTableau be = DirkTableau::backward_euler();
  auto forcing_at = [&](double) { return g; };
  DirkStepResult rd = step_dirk(x, {x}, ts, forcing_at, 0.0, dt, be, p, solver,
                                DirkGuessPolicy::CurrentState);
  REQUIRE(rb.report.converged);
  REQUIRE(rd.report.converged);
  CHECK((to_dense(rb.x) - to_dense(rd.x)).norm() <= 1e-7);
  CHECK(rd.stages.size() == 1);
}

TEST_CASE("run_integration of zero data with zero forcing stays zero") {
  ProblemSpec spec;
  spec.name = "zero";
  spec.coeffs = {constant_fun(1.0), constant_fun(0.0), constant_fun(0.0),
                 constant_fun(1.0), constant_fun(1.0), constant_fun(0.0),
                 constant_fun(0.0), constant_fun(1.0)};
  spec.zero_forcing = true;
  spec.t_end = 0.2;
  spec.fd_order = 2;
  Grid grid = Grid::square(15);
  RunOptions opt;
  opt.precond = PrecondChoice::None;
  StepHistory h = run_integration(spec, grid, SchemeSpec::midpoint(), opt);
  const int nt = int(std::floor(spec.t_end / grid.hx));
  CHECK(int(h.records.size()) == nt + 1);  // includes the step-0 snapshot
  for (const auto& r : h.records) {
    CHECK(r.solution_rank == 0);
    CHECK(r.iterations == 0);
    CHECK(std::isnan(r.error));
  }
}

TEST_CASE("run_integration records n_t steps and converges on ex51") {
  ProblemSpec spec = preset("ex51_parameter");
  Grid grid = Grid::square(63);
  RunOptions opt;
  opt.precond = PrecondChoice::Bug;
  StepHistory h = run_integration(spec, grid, SchemeSpec::midpoint(), opt);
  const int nt = int(std::floor(spec.t_end / grid.hx));
  REQUIRE(int(h.records.size()) == nt + 1);
  TolerancePolicy p = tolerance_for(grid.hx, 2);
  for (std::size_t i = 1; i < h.records.size(); ++i) {
    const auto& r = h.records[i];
    CHECK(r.converged);
    CHECK(r.eta <= p.delta);
    CHECK(r.solution_rank >= 1);
  }
  // Error at the final time stays at the discretization scale.
  CHECK(h.records.back().error <= 10.0 * grid.hx * grid.hx);
  // Decaying solution: bounded by a stability margin.
  CHECK(h.records.back().time == doctest::Approx(spec.t_end));
}
