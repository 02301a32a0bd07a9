#include "lrme/matequation.hpp"

#include <Eigen/LU>
#include <Eigen/SparseLU>
#include <random>
#include <stdexcept>

namespace lrme {

namespace {

SpMat sparse_identity(Index n) {
  SpMat id(n, n);
  id.setIdentity();
  return id;
}

// Assembles sum_j (G_j^T kron C_j) for dense r x r couplings G_j and solves
// the vectorized system for K (n x r).
Eigen::MatrixXd solve_projected(const std::vector<const SpMat*>& cs,
                                const std::vector<Eigen::MatrixXd>& gs,
                                const Eigen::MatrixXd& rhs) {
  const Index n = rhs.rows();
  const Index r = rhs.cols();
  std::vector<Eigen::Triplet<double>> trips;
  std::size_t nnz = 0;
  for (const auto* c : cs) nnz += std::size_t(c->nonZeros()) * r * r;
  trips.reserve(nnz);
  for (std::size_t j = 0; j < cs.size(); ++j) {
    const SpMat& c = *cs[j];
    const Eigen::MatrixXd& g = gs[j];
    for (Index outer = 0; outer < c.outerSize(); ++outer) {
      for (SpMat::InnerIterator it(c, outer); it; ++it) {
        for (Index a = 0; a < r; ++a)
          for (Index b = 0; b < r; ++b)
            trips.emplace_back(a * n + it.row(), b * n + it.col(),
                               g(b, a) * it.value());
      }
    }
  }
  SpMat sys(n * r, n * r);
  sys.setFromTriplets(trips.begin(), trips.end());

  Eigen::SparseLU<SpMat> lu(sys);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("projected system solve failed (singular factorization)");
  Eigen::VectorXd vec_rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), n * r);
  Eigen::VectorXd sol = lu.solve(vec_rhs);

  Eigen::MatrixXd k = Eigen::Map<Eigen::MatrixXd>(sol.data(), n, r);
  double res = (sys * sol - vec_rhs).norm();
  if (!(res <= 1e-8 * vec_rhs.norm() + 1e-13))
    throw std::runtime_error(
        "projected system solve inaccurate, residual " + std::to_string(res) +
        " (likely ill-conditioned projected operator)");
  return k;
}

}  // namespace

MultitermOperator MultitermOperator::identity(Index rows, Index cols) {
  MultitermOperator op;
  op.terms.emplace_back(sparse_identity(rows), sparse_identity(cols));
  return op;
}

std::vector<Term> applied_terms(const MultitermOperator& op,
                                const FactoredMatrix& x) {
  if (op.rows() != x.rows() || op.cols() != x.cols())
    throw std::invalid_argument("applied_terms: dimension mismatch");
  std::vector<Term> out;
  if (x.rank() == 0) return out;
  out.reserve(op.terms.size());
  for (const auto& [c, d] : op.terms)
    out.emplace_back(1.0, c * x.left(), x.core(), d * x.right());
  return out;
}

FactoredMatrix apply_lowrank(const MultitermOperator& op,
                             const FactoredMatrix& x, double eps) {
  return round_terms(applied_terms(op, x), eps, op.rows(), op.cols());
}

Eigen::MatrixXd apply_dense(const MultitermOperator& op,
                            const Eigen::MatrixXd& x) {
  if (op.rows() != x.rows() || op.cols() != x.cols())
    throw std::invalid_argument("apply_dense: dimension mismatch");
  if (x.size() > kDenseCap) throw std::length_error("apply_dense: size cap exceeded");
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (const auto& [c, d] : op.terms) y += c * x * d.transpose();
  return y;
}

OperatorNormEstimate estimate_norm(const MultitermOperator& op,
                                   std::uint64_t seed) {
  const Index m1 = op.rows(), m2 = op.cols();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  OperatorNormEstimate est;
  est.seed = seed;
  Eigen::MatrixXd w(m1, m2);
  for (int sample = 0; sample < 20; ++sample) {
    for (Index j = 0; j < m2; ++j)
      for (Index i = 0; i < m1; ++i)
        w(i, j) = sample < 10 ? gauss(rng) : unif(rng);
    w /= w.norm();
    est.value = std::max(est.value, apply_dense(op, w).norm());
    ++est.sample_count;
  }
  return est;
}

Eigen::MatrixXd solve_k_system(const MultitermOperator& op,
                               const Eigen::MatrixXd& v,
                               const Eigen::MatrixXd& rhs) {
  if (v.rows() != op.cols() || rhs.rows() != op.rows() || rhs.cols() != v.cols())
    throw std::invalid_argument("solve_k_system: dimension mismatch");
  std::vector<const SpMat*> cs;
  std::vector<Eigen::MatrixXd> gs;
  for (const auto& [c, d] : op.terms) {
    cs.push_back(&c);
    gs.emplace_back((d * v).transpose() * v);  // G_j = V^T D_j^T V
  }
  return solve_projected(cs, gs, rhs);
}

Eigen::MatrixXd solve_l_system(const MultitermOperator& op,
                               const Eigen::MatrixXd& u,
                               const Eigen::MatrixXd& rhs) {
  if (u.rows() != op.rows() || rhs.rows() != op.cols() || rhs.cols() != u.cols())
    throw std::invalid_argument("solve_l_system: dimension mismatch");
  std::vector<const SpMat*> ds;
  std::vector<Eigen::MatrixXd> hs;
  for (const auto& [c, d] : op.terms) {
    ds.push_back(&d);
    hs.emplace_back((c * u).transpose() * u);  // H_j = U^T C_j^T U
  }
  return solve_projected(ds, hs, rhs);
}

Eigen::MatrixXd solve_galerkin_system(const MultitermOperator& op,
                                      const Eigen::MatrixXd& u,
                                      const Eigen::MatrixXd& v,
                                      const Eigen::MatrixXd& rhs) {
  if (u.rows() != op.rows() || v.rows() != op.cols() ||
      rhs.rows() != u.cols() || rhs.cols() != v.cols())
    throw std::invalid_argument("solve_galerkin_system: dimension mismatch");
  const Index ru = u.cols(), rv = v.cols();
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(ru * rv, ru * rv);
  for (const auto& [c, d] : op.terms) {
    Eigen::MatrixXd p = u.transpose() * (c * u);          // ru x ru
    Eigen::MatrixXd q = (d * v).transpose() * v;          // rv x rv, = V^T D^T V
    for (Index a = 0; a < rv; ++a)
      for (Index b = 0; b < rv; ++b)
        sys.block(a * ru, b * ru, ru, ru) += q(b, a) * p;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
  Eigen::VectorXd vec_rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), ru * rv);
  Eigen::VectorXd sol = lu.solve(vec_rhs);
  double res = (sys * sol - vec_rhs).norm();
  if (!(res <= 1e-8 * vec_rhs.norm() + 1e-13))
    throw std::runtime_error("galerkin system solve inaccurate");
  return Eigen::Map<Eigen::MatrixXd>(sol.data(), ru, rv);
}

}  // namespace lrme
