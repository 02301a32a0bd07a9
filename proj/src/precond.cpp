#include "lrme/precond.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace lrme {

namespace {

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& a) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
}

}  // namespace

BugPreconditioner::BugPreconditioner(const MultitermOperator& op,
                                     const FactoredMatrix& anchor)
    : op_(op), anchor_(anchor) {
  if (anchor.rank() < 1)
    throw std::invalid_argument("BugPreconditioner: anchor rank must be >= 1");
  if (anchor.rows() != op.rows() || anchor.cols() != op.cols())
    throw std::invalid_argument("BugPreconditioner: anchor/operator mismatch");
}

FactoredMatrix BugPreconditioner::apply(const FactoredMatrix& b) const {
  if (b.rows() != op_.rows() || b.cols() != op_.cols())
    throw std::invalid_argument("bug_apply: dimension mismatch");
  const Index r = anchor_.rank();
  try {
    // K-step: K0 = b V, solve A(K V^T) V = K0, refresh the column basis.
    Eigen::MatrixXd k0(op_.rows(), r);
    if (b.rank() == 0)
      k0.setZero();
    else
      k0 = b.left() * b.core().asDiagonal() *
           (b.right().transpose() * anchor_.right());
    Eigen::MatrixXd k1 = solve_k_system(op_, anchor_.right(), k0);
    Eigen::MatrixXd u = thin_q(k1);

    // L-step with the freshly computed U.
    Eigen::MatrixXd l0(op_.cols(), r);
    if (b.rank() == 0)
      l0.setZero();
    else
      l0 = b.right() * b.core().asDiagonal() * (b.left().transpose() * u);
    Eigen::MatrixXd l1 = solve_l_system(op_, u, l0);
    Eigen::MatrixXd v = thin_q(l1);

    // Galerkin solve in the updated bases.
    Eigen::MatrixXd sigma0(r, r);
    if (b.rank() == 0)
      sigma0.setZero();
    else
      sigma0 = (u.transpose() * b.left()) * b.core().asDiagonal() *
               (b.right().transpose() * v);
    Eigen::MatrixXd sigma1 = solve_galerkin_system(op_, u, v, sigma0);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(
        sigma1, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!svd.singularValues().allFinite() || !svd.matrixU().allFinite() ||
        !svd.matrixV().allFinite()) {
      // BDCSVD NaN escape on extreme dynamic range; Jacobi is robust here.
      Eigen::JacobiSVD<Eigen::MatrixXd> jsvd(
          sigma1, Eigen::ComputeThinU | Eigen::ComputeThinV);
      return FactoredMatrix::from_factors(u * jsvd.matrixU(),
                                          jsvd.singularValues(),
                                          v * jsvd.matrixV());
    }
    return FactoredMatrix::from_factors(u * svd.matrixU(),
                                        svd.singularValues(),
                                        v * svd.matrixV());
  } catch (const std::runtime_error&) {
    // Singular projected system; degrade to the unpreconditioned residual.
    fallback_hit_ = true;
    return b;
  }
}

EsQuadrature es_quadrature(double delta0, double eta_split, double t_max) {
  if (!(delta0 > 0.0 && delta0 < 1.0 && eta_split > 0.0 && eta_split < 1.0))
    throw std::invalid_argument("es_quadrature: split parameters outside (0,1)");
  if (!(t_max > 1.0)) throw std::invalid_argument("es_quadrature: T must exceed 1");
  EsQuadrature q;
  q.alpha = 2.0 * M_PI /
            (std::log(3.0) + std::abs(std::log(std::cos(1.0))) +
             std::abs(std::log(delta0 / 2.0)));
  q.m_plus = int(std::ceil(std::log(std::abs(std::log(delta0 / 2.0))) / q.alpha));
  q.n_minus = int(std::ceil(
      (std::abs(std::log(eta_split / 2.0)) + std::log(t_max)) / q.alpha));
  return q;
}

double es_scalar_sum(const EsQuadrature& q, double t) {
  double s = 0.0;
  for (int k = -q.n_minus; k <= q.m_plus; ++k) {
    const double ek = std::exp(k * q.alpha);
    s += ek * std::exp(-ek * t);
  }
  return q.alpha * s;
}

std::pair<double, double> es_parameters_for_problem(double tau, double h,
                                                    double contrast_eta) {
  if (!(h > 0.0) || tau < 0.0)
    throw std::invalid_argument("es_parameters_for_problem: bad tau/h");
  const double t_max = 4.0 * tau / (contrast_eta * contrast_eta * h * h);
  return {0.2, std::max(t_max, 2.0)};
}

EsPreconditioner EsPreconditioner::build(const SpMat& cbar, const SpMat& dbar,
                                         double tau, double delta_star,
                                         double t_max, double eps) {
  if (!(delta_star > 0.0 && delta_star < 1.0))
    throw std::invalid_argument("EsPreconditioner: delta_star outside (0,1)");
  EsPreconditioner p;
  p.quad_ = es_quadrature(delta_star / 2.0, delta_star / 2.0, t_max);
  p.eps_ = eps;

  auto exponentials = [&](const SpMat& mat, Index n) {
    Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(n, n) * 0.5 - tau * Eigen::MatrixXd(mat);
    std::vector<Eigen::MatrixXd> exps;
    const bool symmetric = (a - a.transpose()).norm() <= 1e-10 * a.norm();
    double min_eig;
    if (symmetric) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
      min_eig = eig.eigenvalues().minCoeff();
      for (int k = -p.quad_.n_minus; k <= p.quad_.m_plus; ++k) {
        const double ek = std::exp(k * p.quad_.alpha);
        exps.push_back(eig.eigenvectors() *
                       (-ek * eig.eigenvalues().array()).exp().matrix().asDiagonal() *
                       eig.eigenvectors().transpose());
      }
    } else {
      // Boundary closures of the 4th-order stencils break symmetry; use a
      // scaling-and-squaring exponential instead.
      min_eig = Eigen::EigenSolver<Eigen::MatrixXd>(a, false)
                    .eigenvalues()
                    .real()
                    .minCoeff();
      for (int k = -p.quad_.n_minus; k <= p.quad_.m_plus; ++k) {
        const double ek = std::exp(k * p.quad_.alpha);
        exps.push_back((-ek * a).exp());
      }
    }
    return std::make_pair(std::move(exps), min_eig);
  };

  auto [e1, min1] = exponentials(cbar, cbar.rows());
  auto [e2, min2] = exponentials(dbar, dbar.rows());
  // The quadrature lemma assumes the combined spectrum starts near 1.
  if (min1 + min2 < 0.9)
    throw std::runtime_error("EsPreconditioner: combined spectrum below 0.9; "
                             "operator shift assumption violated");
  p.exp_a1_ = std::move(e1);
  p.exp_a2_ = std::move(e2);
  for (int k = -p.quad_.n_minus; k <= p.quad_.m_plus; ++k)
    p.weights_.push_back(p.quad_.alpha * std::exp(k * p.quad_.alpha));
  return p;
}

FactoredMatrix EsPreconditioner::apply(const FactoredMatrix& b) const {
  const Index m1 = exp_a1_.front().rows();
  const Index m2 = exp_a2_.front().rows();
  if (b.rows() != m1 || b.cols() != m2)
    throw std::invalid_argument("es_apply: dimension mismatch");
  if (b.rank() == 0) return FactoredMatrix::zero(m1, m2);
  std::vector<Term> ts;
  ts.reserve(weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i)
    ts.emplace_back(weights_[i], exp_a1_[i] * b.left(), b.core(),
                    exp_a2_[i] * b.right());
  FactoredMatrix r = round_terms(ts, eps_, m1, m2);
  if (max_rank_ > 0 && r.rank() > max_rank_)
    r = FactoredMatrix::from_factors(r.left().leftCols(max_rank_),
                                     r.core().head(max_rank_),
                                     r.right().leftCols(max_rank_));
  return r;
}

PrecondFactory identity_factory() {
  auto id = std::make_shared<const IdentityPreconditioner>();
  return [id](int, const FactoredMatrix&) -> PrecondPtr { return id; };
}

PrecondFactory fixed_factory(PrecondPtr m) {
  return [m = std::move(m)](int, const FactoredMatrix&) { return m; };
}

PrecondFactory bug_factory(const MultitermOperator& op) {
  return [&op](int, const FactoredMatrix& x) -> PrecondPtr {
    if (x.rank() == 0) return std::make_shared<const IdentityPreconditioner>();
    return std::make_shared<const BugPreconditioner>(op, x);
  };
}

PrecondFactory hybrid_factory(const MultitermOperator& op, PrecondPtr es) {
  return [&op, es = std::move(es)](int cycle, const FactoredMatrix& x) -> PrecondPtr {
    if (cycle % 2 == 1) return es;
    if (x.rank() == 0) return std::make_shared<const IdentityPreconditioner>();
    return std::make_shared<const BugPreconditioner>(op, x);
  };
}

}  // namespace lrme
