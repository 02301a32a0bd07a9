#ifndef LRME_LOWRANK_HPP
#define LRME_LOWRANK_HPP

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace lrme {

using Index = Eigen::Index;

// Rank-r matrix stored as left * core.asDiagonal() * right^T with
// orthonormal left/right factors and a nonnegative, nonincreasing core.
// Rank 0 represents the zero matrix of the given shape.
class FactoredMatrix {
public:
  FactoredMatrix() = default;

  static FactoredMatrix zero(Index rows, Index cols);

  // Takes the factors as-is; caller guarantees orthonormality and ordering.
  static FactoredMatrix from_factors(Eigen::MatrixXd left, Eigen::VectorXd core,
                                     Eigen::MatrixXd right);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index rank() const { return core_.size(); }

  const Eigen::MatrixXd& left() const { return left_; }
  const Eigen::VectorXd& core() const { return core_; }
  const Eigen::MatrixXd& right() const { return right_; }

  // Frobenius norm, i.e. the l2 norm of the core.
  double norm() const { return core_.norm(); }

private:
  Index rows_ = 0;
  Index cols_ = 0;
  Eigen::MatrixXd left_;   // rows_ x r
  Eigen::VectorXd core_;   // r
  Eigen::MatrixXd right_;  // cols_ x r
};

// One summand of a low-rank sum: weight * U * diag(s) * V^T.
// The factors need not be orthonormal and s may have any signs.
struct Term {
  double weight = 1.0;
  Eigen::MatrixXd left;
  Eigen::VectorXd core;
  Eigen::MatrixXd right;

  Term() = default;
  Term(double w, const FactoredMatrix& x)
      : weight(w), left(x.left()), core(x.core()), right(x.right()) {}
  Term(double w, Eigen::MatrixXd l, Eigen::VectorXd c, Eigen::MatrixXd r)
      : weight(w), left(std::move(l)), core(std::move(c)), right(std::move(r)) {}
};

using WeightedTermList = std::vector<std::pair<double, FactoredMatrix>>;

// Truncation threshold mode: the tail criterion sqrt(sum_{j>r} sigma_j^2) <= eps
// is absolute by default; relative scales eps by the total singular value norm.
enum class TruncationMode { Absolute, Relative };

// Truncated SVD of a dense matrix; keeps the smallest rank whose discarded
// tail satisfies the threshold.
FactoredMatrix truncated_svd(const Eigen::MatrixXd& a, double eps,
                             TruncationMode mode = TruncationMode::Absolute);

// Recompression of sum_j w_j U_j diag(s_j) V_j^T: column-pivoted QR of the
// concatenated factors, truncated SVD of the small core, recombination.
// Shape (rows, cols) must be supplied so an all-zero list stays well formed.
FactoredMatrix round_terms(const std::vector<Term>& terms, double eps,
                           Index rows, Index cols,
                           TruncationMode mode = TruncationMode::Absolute);

FactoredMatrix round_sum(const WeightedTermList& terms, double eps,
                         TruncationMode mode = TruncationMode::Absolute);

// Frobenius inner product computed factor-wise; never forms dense products.
double inner(const FactoredMatrix& x, const FactoredMatrix& y);

double norm(const FactoredMatrix& x);

// Densification cap, in matrix entries.
inline constexpr Index kDenseCap = Index(1) << 22;

Eigen::MatrixXd to_dense(const FactoredMatrix& x, Index cap = kDenseCap);

}  // namespace lrme

#endif
