#ifndef LRME_TESTS_HELPERS_HPP
#define LRME_TESTS_HELPERS_HPP

#include <random>

#include <Eigen/Dense>

#include "lrme/lowrank.hpp"
#include "lrme/matequation.hpp"

namespace lrme::test {

inline Eigen::MatrixXd random_dense(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = dist(gen);
  return a;
}

inline Eigen::MatrixXd random_lowrank_dense(Index rows, Index cols, Index rank,
                                            std::uint64_t seed) {
  return random_dense(rows, rank, seed) *
         random_dense(rank, cols, seed + 1) / double(rank);
}

inline FactoredMatrix random_factored(Index rows, Index cols, Index rank,
                                      std::uint64_t seed) {
  // Relative truncation strips the numerical-noise tail so the result has
  // exactly the requested rank.
  return truncated_svd(random_lowrank_dense(rows, cols, rank, seed), 1e-12,
                       TruncationMode::Relative);
}

inline Eigen::MatrixXd kron_dense(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

// vec(C X D^T) = (D kron C) vec(X) with column-major stacking.
inline Eigen::MatrixXd dense_system_matrix(const MultitermOperator& op) {
  const Index n = op.rows() * op.cols();
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [c, d] : op.terms)
    sys += kron_dense(Eigen::MatrixXd(d), Eigen::MatrixXd(c));
  return sys;
}

inline Eigen::VectorXd vec(const Eigen::MatrixXd& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

inline Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Index rows, Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

inline SpMat sparse_identity(Index n) {
  SpMat id(n, n);
  id.setIdentity();
  return id;
}

// 1-D Dirichlet Laplacian tridiag(1, -2, 1) / h^2 on n interior points of
// [-1, 1].
inline SpMat laplacian_1d(Index n) {
  const double h = 2.0 / double(n + 1);
  SpMat lap(n, n);
  std::vector<Eigen::Triplet<double>> trip;
  for (Index i = 0; i < n; ++i) {
    trip.emplace_back(i, i, -2.0 / (h * h));
    if (i > 0) trip.emplace_back(i, i - 1, 1.0 / (h * h));
    if (i + 1 < n) trip.emplace_back(i, i + 1, 1.0 / (h * h));
  }
  lap.setFromTriplets(trip.begin(), trip.end());
  return lap;
}

// Implicit heat-equation operator X - tau (L X + X L^T) on an n x n grid.
inline MultitermOperator heat_operator(Index n, double tau) {
  const SpMat id = sparse_identity(n);
  const SpMat lap = laplacian_1d(n);
  MultitermOperator op;
  op.terms.emplace_back(id, id);
  op.terms.emplace_back(SpMat(-tau * lap), id);
  op.terms.emplace_back(id, SpMat(-tau * lap));
  return op;
}

}  // namespace lrme::test

#endif
