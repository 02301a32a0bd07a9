#include "lrme/lowrank.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <stdexcept>

namespace lrme {

namespace {

// Smallest rank r such that sqrt(sum_{j>r} sigma_j^2) <= threshold.
Index trunc_rank(const Eigen::VectorXd& sigma, double eps, TruncationMode mode) {
  double threshold = eps;
  if (mode == TruncationMode::Relative) threshold = eps * sigma.norm();
  double tail2 = 0.0;
  const double thr2 = threshold * threshold;
  Index r = sigma.size();
  for (Index j = sigma.size() - 1; j >= 0; --j) {
    tail2 += sigma(j) * sigma(j);
    if (tail2 > thr2) break;
    r = j;
  }
  return r;
}

struct ThinSvd {
  Eigen::MatrixXd u, v;
  Eigen::VectorXd sigma;
};

// BDCSVD can emit NaNs on inputs with extreme singular-value dynamic range;
// detect that and redo the factorization with the slower, robust JacobiSVD.
ThinSvd thin_svd(const Eigen::MatrixXd& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().allFinite() && svd.matrixU().allFinite() &&
      svd.matrixV().allFinite())
    return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
  Eigen::JacobiSVD<Eigen::MatrixXd> jsvd(a, Eigen::ComputeThinU |
                                                Eigen::ComputeThinV);
  return {jsvd.matrixU(), jsvd.matrixV(), jsvd.singularValues()};
}

}  // namespace

FactoredMatrix FactoredMatrix::zero(Index rows, Index cols) {
  FactoredMatrix x;
  x.rows_ = rows;
  x.cols_ = cols;
  x.left_.resize(rows, 0);
  x.core_.resize(0);
  x.right_.resize(cols, 0);
  return x;
}

FactoredMatrix FactoredMatrix::from_factors(Eigen::MatrixXd left,
                                            Eigen::VectorXd core,
                                            Eigen::MatrixXd right) {
  if (left.cols() != core.size() || right.cols() != core.size())
    throw std::invalid_argument("FactoredMatrix: factor/core rank mismatch");
  FactoredMatrix x;
  x.rows_ = left.rows();
  x.cols_ = right.rows();
  x.left_ = std::move(left);
  x.core_ = std::move(core);
  x.right_ = std::move(right);
  return x;
}

FactoredMatrix truncated_svd(const Eigen::MatrixXd& a, double eps,
                             TruncationMode mode) {
  if (!a.allFinite())
    throw std::invalid_argument("truncated_svd: non-finite entries");
  if (a.size() == 0 || a.isZero(0.0)) return FactoredMatrix::zero(a.rows(), a.cols());
  const ThinSvd svd = thin_svd(a);
  const Index r = trunc_rank(svd.sigma, eps, mode);
  if (r == 0) return FactoredMatrix::zero(a.rows(), a.cols());
  return FactoredMatrix::from_factors(svd.u.leftCols(r), svd.sigma.head(r),
                                      svd.v.leftCols(r));
}

FactoredMatrix round_terms(const std::vector<Term>& terms, double eps,
                           Index rows, Index cols, TruncationMode mode) {
  Index total = 0;
  for (const auto& t : terms) {
    if (t.left.rows() != rows || t.right.rows() != cols)
      throw std::invalid_argument("round_terms: dimension mismatch");
    if (t.left.cols() != t.core.size() || t.right.cols() != t.core.size())
      throw std::invalid_argument("round_terms: factor/core rank mismatch");
    total += t.core.size();
  }
  if (total == 0) return FactoredMatrix::zero(rows, cols);

  Eigen::MatrixXd u_cat(rows, total), v_cat(cols, total);
  Eigen::VectorXd s_cat(total);
  Index off = 0;
  for (const auto& t : terms) {
    const Index r = t.core.size();
    if (r == 0) continue;
    u_cat.middleCols(off, r) = t.left;
    v_cat.middleCols(off, r) = t.right;
    s_cat.segment(off, r) = t.weight * t.core;  // weights folded into the core
    off += r;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr1(u_cat), qr2(v_cat);
  const Index q1 = std::min(rows, total), q2 = std::min(cols, total);
  Eigen::MatrixXd r1 = qr1.matrixR().topRows(q1).triangularView<Eigen::Upper>();
  Eigen::MatrixXd r2 = qr2.matrixR().topRows(q2).triangularView<Eigen::Upper>();
  // u_cat = Q1 * R1 * P1^{-1}, so the small core below reconstructs the sum
  // exactly as Q1 * core * Q2^T.
  Eigen::MatrixXd core = (r1 * qr1.colsPermutation().inverse()) *
                         s_cat.asDiagonal() *
                         (r2 * qr2.colsPermutation().inverse()).transpose();

  const ThinSvd svd = thin_svd(core);
  const Index r = trunc_rank(svd.sigma, eps, mode);
  if (r == 0) return FactoredMatrix::zero(rows, cols);

  Eigen::MatrixXd thin_q1 = qr1.householderQ() * Eigen::MatrixXd::Identity(rows, q1);
  Eigen::MatrixXd thin_q2 = qr2.householderQ() * Eigen::MatrixXd::Identity(cols, q2);
  return FactoredMatrix::from_factors(thin_q1 * svd.u.leftCols(r),
                                      svd.sigma.head(r),
                                      thin_q2 * svd.v.leftCols(r));
}

FactoredMatrix round_sum(const WeightedTermList& terms, double eps,
                         TruncationMode mode) {
  if (terms.empty()) throw std::invalid_argument("round_sum: empty term list");
  const Index rows = terms.front().second.rows();
  const Index cols = terms.front().second.cols();
  std::vector<Term> ts;
  ts.reserve(terms.size());
  for (const auto& [w, x] : terms) ts.emplace_back(w, x);
  return round_terms(ts, eps, rows, cols, mode);
}

double inner(const FactoredMatrix& x, const FactoredMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("inner: dimension mismatch");
  if (x.rank() == 0 || y.rank() == 0) return 0.0;
  Eigen::MatrixXd uu = x.left().transpose() * y.left();    // rx x ry
  Eigen::MatrixXd vv = x.right().transpose() * y.right();  // rx x ry
  return (x.core().asDiagonal() * uu * y.core().asDiagonal())
      .cwiseProduct(vv)
      .sum();
}

double norm(const FactoredMatrix& x) { return x.norm(); }

Eigen::MatrixXd to_dense(const FactoredMatrix& x, Index cap) {
  if (x.rows() * x.cols() > cap)
    throw std::length_error("to_dense: size cap exceeded");
  if (x.rank() == 0) return Eigen::MatrixXd::Zero(x.rows(), x.cols());
  return x.left() * x.core().asDiagonal() * x.right().transpose();
}

}  // namespace lrme
