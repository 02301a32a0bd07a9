#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "lrme/reference.hpp"

using namespace lrme;
using namespace lrme::test;

namespace {

std::vector<std::pair<SpMat, SpMat>> heat_terms(Index n) {
  SpMat lap = laplacian_1d(n);
  return {{lap, sparse_identity(n)}, {sparse_identity(n), lap}};
}

}  // namespace

TEST_CASE("DenseImplicitSolver solves the vectorized implicit system") {
  const Index n = 12;
  auto ts = heat_terms(n);
  const double dt_coef = 0.03;
  DenseImplicitSolver solver(ts, dt_coef);
  Eigen::MatrixXd b = random_dense(n, n, 1);
  Eigen::MatrixXd x = solver.solve(b);
  Eigen::MatrixXd res = x - dt_coef * dense_apply_terms(ts, x) - b;
  CHECK(res.norm() <= 1e-10 * b.norm());
}

TEST_CASE("dense_apply_terms matches the Kronecker oracle") {
  const Index n = 8;
  auto ts = heat_terms(n);
  Eigen::MatrixXd x = random_dense(n, n, 2);
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n * n, n * n);
  for (const auto& [a, b] : ts)
    sys += kron_dense(Eigen::MatrixXd(b), Eigen::MatrixXd(a));
  CHECK((vec(dense_apply_terms(ts, x)) - sys * vec(x)).norm() <= 1e-12);

  std::vector<std::pair<SpMat, SpMat>> id{{sparse_identity(n), sparse_identity(n)}};
  CHECK((dense_apply_terms(id, x) - x).norm() <= 1e-14);
  CHECK(dense_apply_terms(ts, Eigen::MatrixXd::Zero(n, n)).isZero(0.0));
}

TEST_CASE("dense_run converges at second order on ex51") {
  ProblemSpec spec = preset("ex51_parameter");
  SchemeSpec scheme = SchemeSpec::midpoint();
  std::vector<double> errs;
  for (Index n : {31, 63, 127}) {
    DenseRunResult r = dense_run(spec, Grid::square(n), scheme);
    REQUIRE_FALSE(r.errors.empty());
    REQUIRE(r.states.size() == r.times.size());
    CHECK(r.times.back() == doctest::Approx(spec.t_end));
    errs.push_back(r.errors.back());
  }
  CHECK(std::log2(errs[0] / errs[1]) >= 1.7);
  CHECK(std::log2(errs[1] / errs[2]) >= 1.8);
}

TEST_CASE("dense_run agrees with the low-rank integrator") {
  ProblemSpec spec = preset("ex51_parameter");
  Grid grid = Grid::square(31);
  SchemeSpec scheme = SchemeSpec::midpoint();
  DenseRunResult dense = dense_run(spec, grid, scheme);
  RunOptions opt;
  opt.precond = PrecondChoice::Bug;
  StepHistory lr = run_integration(spec, grid, scheme, opt);
  const double e_dense = dense.errors.back();
  const double e_lr = lr.records.back().error;
  // Same discretization error up to the low-rank truncation budget.
  CHECK(std::abs(e_lr - e_dense) <= 0.05 * e_dense + 10.0 * grid.hx * grid.hx *
                                                        grid.hx);
}

TEST_CASE("dense_run without a manufactured solution has no error column") {
  ProblemSpec spec = preset("ex54_ic");
  DenseRunResult r = dense_run(spec, Grid::square(15), SchemeSpec::midpoint());
  CHECK(r.errors.empty());
  CHECK(r.states.size() >= 2);
}

TEST_CASE("rank_profile trivial cases") {
  const Index n = 10;
  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
  Eigen::MatrixXd rank1 = u * u.transpose();
  std::vector<Eigen::MatrixXd> states{Eigen::MatrixXd::Zero(n, n), rank1};
  std::vector<int> ranks = rank_profile(states, 1e-10);
  REQUIRE(ranks.size() == 2);
  CHECK(ranks[0] == 0);
  CHECK(ranks[1] == 1);
}

TEST_CASE("ex54_ic dense ranks grow from the rank-1 initial condition") {
  ProblemSpec spec = preset("ex54_ic");
  Grid grid = Grid::square(31);
  DenseRunResult r = dense_run(spec, grid, SchemeSpec::midpoint());
  const double eps = std::pow(grid.hx, 3);
  std::vector<int> ranks = rank_profile(r.states, eps);
  REQUIRE(ranks.size() >= 3);
  CHECK(ranks.front() == 1);
  CHECK(*std::max_element(ranks.begin(), ranks.end()) > 1);
}
