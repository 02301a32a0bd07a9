#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "helpers.hpp"
#include "lrme/lowrank.hpp"

using namespace lrme;
using test::random_dense;
using test::random_factored;

namespace {

// Dense matrix with prescribed singular values.
Eigen::MatrixXd with_singular_values(Index rows, Index cols,
                                     const Eigen::VectorXd& sigma,
                                     std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qu(random_dense(rows, rows, seed));
  Eigen::HouseholderQR<Eigen::MatrixXd> qv(random_dense(cols, cols, seed + 1));
  Eigen::MatrixXd u = qu.householderQ();
  Eigen::MatrixXd v = qv.householderQ();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rows, cols);
  for (Index i = 0; i < sigma.size(); ++i) s(i, i) = sigma(i);
  return u * s * v.transpose();
}

void check_invariants(const FactoredMatrix& x) {
  const Index r = x.rank();
  if (r == 0) return;
  const Eigen::MatrixXd iu =
      x.left().transpose() * x.left() - Eigen::MatrixXd::Identity(r, r);
  const Eigen::MatrixXd iv =
      x.right().transpose() * x.right() - Eigen::MatrixXd::Identity(r, r);
  CHECK(iu.norm() <= 1e-12);
  CHECK(iv.norm() <= 1e-12);
  for (Index i = 0; i < r; ++i) {
    CHECK(x.core()(i) >= 0.0);
    if (i > 0) CHECK(x.core()(i) <= x.core()(i - 1) + 1e-14);
  }
}

}  // namespace

TEST_CASE("truncated_svd zero matrix gives rank 0") {
  FactoredMatrix x = truncated_svd(Eigen::MatrixXd::Zero(5, 7), 1e-8);
  CHECK(x.rank() == 0);
  CHECK(x.rows() == 5);
  CHECK(x.cols() == 7);
  CHECK(to_dense(x).isZero(0.0));
}

TEST_CASE("truncated_svd drops a tail below eps") {
  Eigen::Vector3d sigma(3.0, 2.0, 1e-9);
  FactoredMatrix x = truncated_svd(Eigen::Vector3d(sigma).asDiagonal(), 1e-6);
  REQUIRE(x.rank() == 2);
  CHECK(x.core()(0) == doctest::Approx(3.0));
  CHECK(x.core()(1) == doctest::Approx(2.0));
}

TEST_CASE("truncated_svd rank against a full SVD oracle") {
  Eigen::VectorXd sigma(6);
  sigma << 5.0, 1.0, 0.1, 0.01, 0.0, 0.0;
  Eigen::MatrixXd a = with_singular_values(8, 6, sigma, 11);
  FactoredMatrix x = truncated_svd(a, 0.05);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  // The oracle recomputes the smallest rank with tail norm <= eps.
  Eigen::VectorXd sv = svd.singularValues();
  Index oracle = sv.size();
  double tail2 = 0.0;
  for (Index j = sv.size() - 1; j >= 0; --j) {
    tail2 += sv(j) * sv(j);
    if (tail2 > 0.05 * 0.05) break;
    oracle = j;
  }
  CHECK(x.rank() == oracle);
  CHECK(x.rank() == 3);
  CHECK((a - to_dense(x)).norm() <= 0.05);
  check_invariants(x);
}

TEST_CASE("truncated_svd with eps 0 reproduces the input") {
  Eigen::MatrixXd a = random_dense(9, 7, 3);
  FactoredMatrix x = truncated_svd(a, 0.0);
  CHECK((a - to_dense(x)).norm() <= 1e-12 * a.norm());
}

TEST_CASE("truncated_svd rejects non-finite input") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a(1, 1) = std::nan("");
  CHECK_THROWS_AS(truncated_svd(a, 0.0), std::invalid_argument);
}

TEST_CASE("relative truncation mode scales the threshold") {
  Eigen::Vector2d sigma(100.0, 1.0);
  Eigen::MatrixXd a = Eigen::Vector2d(sigma).asDiagonal();
  CHECK(truncated_svd(a, 0.05, TruncationMode::Relative).rank() == 1);
  CHECK(truncated_svd(a, 0.05, TruncationMode::Absolute).rank() == 2);
}

TEST_CASE("round_sum of a single term is the identity") {
  FactoredMatrix x = random_factored(10, 8, 3, 21);
  FactoredMatrix y = round_sum({{1.0, x}}, 0.0);
  CHECK((to_dense(x) - to_dense(y)).norm() <= 1e-12);
  check_invariants(y);
}

TEST_CASE("round_sum cancels X - X to rank 0") {
  FactoredMatrix x = random_factored(10, 8, 3, 22);
  FactoredMatrix y = round_sum({{1.0, x}, {-1.0, x}}, 1e-12);
  CHECK(y.rank() == 0);
}

TEST_CASE("round_sum against a dense-sum full-SVD oracle") {
  const double eps = 1e-3;
  WeightedTermList terms;
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(16, 16);
  for (int j = 0; j < 3; ++j) {
    const double w = (j == 1) ? -0.7 : 1.3;
    FactoredMatrix x = random_factored(16, 16, 2, 30 + j);
    terms.emplace_back(w, x);
    dense += w * to_dense(x);
  }
  FactoredMatrix rounded = round_sum(terms, eps);
  FactoredMatrix oracle = truncated_svd(dense, eps);
  CHECK(rounded.rank() == oracle.rank());
  CHECK((to_dense(rounded) - to_dense(oracle)).norm() <= 2e-3);
  CHECK((dense - to_dense(rounded)).norm() <= eps);
  check_invariants(rounded);
}

TEST_CASE("round_sum error bound holds across tolerances") {
  for (double eps : {0.0, 1e-8, 1e-4, 1e-1}) {
    WeightedTermList terms;
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(12, 9);
    for (int j = 0; j < 4; ++j) {
      FactoredMatrix x = random_factored(12, 9, 2, 40 + j);
      const double w = std::pow(-1.0, j) * (j + 0.5);
      terms.emplace_back(w, x);
      dense += w * to_dense(x);
    }
    FactoredMatrix rounded = round_sum(terms, eps);
    CHECK((dense - to_dense(rounded)).norm() <= eps + 1e-10);
    check_invariants(rounded);
  }
}

TEST_CASE("round_terms validates dimensions") {
  std::vector<Term> ts;
  ts.emplace_back(1.0, random_factored(5, 4, 2, 50));
  CHECK_THROWS_AS(round_terms(ts, 0.0, 6, 4), std::invalid_argument);
  CHECK(round_terms({}, 0.0, 6, 4).rank() == 0);
}

TEST_CASE("inner of X with itself is the squared core norm") {
  FactoredMatrix x = random_factored(12, 10, 3, 60);
  CHECK(inner(x, x) == doctest::Approx(x.core().squaredNorm()).epsilon(1e-12));
  CHECK(inner(x, FactoredMatrix::zero(12, 10)) == 0.0);
}

TEST_CASE("inner matches the dense Frobenius inner product") {
  FactoredMatrix x = random_factored(12, 10, 3, 61);
  FactoredMatrix y = random_factored(12, 10, 3, 62);
  const double dense = (to_dense(x).array() * to_dense(y).array()).sum();
  CHECK(inner(x, y) == doctest::Approx(dense).epsilon(1e-12));
  CHECK(inner(y, x) == doctest::Approx(dense).epsilon(1e-12));
  CHECK(std::abs(inner(x, y)) <= norm(x) * norm(y) * (1.0 + 1e-12));
  CHECK_THROWS_AS(inner(x, random_factored(5, 5, 1, 63)), std::invalid_argument);
}

TEST_CASE("norm edge cases") {
  CHECK(norm(FactoredMatrix::zero(4, 4)) == 0.0);
  Eigen::MatrixXd u = Eigen::MatrixXd::Identity(4, 2);
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(5, 2);
  Eigen::Vector2d s(4.0, 3.0);
  CHECK(norm(FactoredMatrix::from_factors(u, s, v)) == doctest::Approx(5.0));
  FactoredMatrix x = random_factored(9, 9, 4, 64);
  CHECK(norm(x) == doctest::Approx(to_dense(x).norm()).epsilon(1e-13));
}

TEST_CASE("to_dense edge cases and round trip") {
  CHECK(to_dense(FactoredMatrix::zero(3, 2)).isZero(0.0));
  Eigen::MatrixXd u = Eigen::MatrixXd::Identity(3, 1);
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(4, 1);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(1, 2.0);
  Eigen::MatrixXd d = to_dense(FactoredMatrix::from_factors(u, s, v));
  CHECK(d(0, 0) == doctest::Approx(2.0));
  CHECK(d.norm() == doctest::Approx(2.0));

  Eigen::MatrixXd a = random_dense(7, 6, 70);
  CHECK((to_dense(truncated_svd(a, 0.0)) - a).norm() <= 1e-12 * a.norm());

  FactoredMatrix big = random_factored(8, 8, 1, 71);
  CHECK_THROWS_AS(to_dense(big, 10), std::length_error);
}
