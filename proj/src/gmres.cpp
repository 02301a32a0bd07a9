#include "lrme/gmres.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>

namespace lrme {

namespace {

constexpr double kBreakdownFactor = 1e-14;

double eta_of(double residual_norm, double norm_a, double x_norm, double b_norm) {
  const double denom = norm_a * x_norm + b_norm;
  if (denom == 0.0)
    return residual_norm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return residual_norm / denom;
}

std::vector<Term> residual_terms(const MultitermOperator& op,
                                 const FactoredMatrix& x,
                                 const FactoredMatrix& b) {
  std::vector<Term> ts;
  if (b.rank() > 0) ts.emplace_back(1.0, b);
  for (auto& t : applied_terms(op, x)) {
    t.weight = -1.0;
    ts.push_back(std::move(t));
  }
  return ts;
}

// One (optionally preconditioned) lrGMRES cycle. The Krylov basis is built on
// A when m == nullptr and on A*M otherwise; the solution correction passes
// through M in the preconditioned case. Stopping always tests the backward
// error of the outer iterate against A and b.
std::pair<FactoredMatrix, SolveReport> lr_gmres_cycle(
    const MultitermOperator& op, const Preconditioner* m,
    const FactoredMatrix& b, const FactoredMatrix& x0, const GmresConfig& cfg,
    double norm_a) {
  const Index m1 = op.rows(), m2 = op.cols();
  SolveReport rep;
  auto rounded = [&](const std::vector<Term>& ts) {
    FactoredMatrix r = round_terms(ts, cfg.eps, m1, m2);
    rep.max_krylov_rank = std::max<int>(rep.max_krylov_rank, int(r.rank()));
    return r;
  };

  FactoredMatrix r0 = rounded(residual_terms(op, x0, b));
  const double beta = r0.norm();
  // An exactly zero residual is the only shortcut; otherwise always take at
  // least one (preconditioned) iteration so loose deltas still get the
  // preconditioner's correction.
  if (beta == 0.0 || r0.rank() == 0) {
    rep.converged = true;
    rep.eta_history.push_back(eta_of(beta, norm_a, x0.norm(), b.norm()));
    return {x0, rep};
  }

  std::vector<FactoredMatrix> basis;
  basis.push_back(
      FactoredMatrix::from_factors(r0.left(), r0.core() / beta, r0.right()));

  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(cfg.m + 1, cfg.m);
  FactoredMatrix x = x0;
  for (int k = 1; k <= cfg.m; ++k) {
    FactoredMatrix z = m ? m->apply(basis[k - 1]) : basis[k - 1];
    FactoredMatrix w = rounded(applied_terms(op, z));
    for (int i = 0; i < k; ++i) {
      const double hik = inner(basis[i], w);
      hess(i, k - 1) = hik;
      w = rounded({Term(1.0, w), Term(-hik, basis[i])});
    }
    w = rounded({Term(1.0, w)});
    const double h_sub = w.norm();
    hess(k, k - 1) = h_sub;
    const bool breakdown = h_sub <= kBreakdownFactor * beta || w.rank() == 0;
    if (!breakdown)
      basis.push_back(
          FactoredMatrix::from_factors(w.left(), w.core() / h_sub, w.right()));

    Eigen::VectorXd ls_rhs = Eigen::VectorXd::Zero(k + 1);
    ls_rhs(0) = beta;
    Eigen::VectorXd y = hess.topLeftCorner(k + 1, k).householderQr().solve(ls_rhs);

    if (!m) {
      std::vector<Term> ts;
      if (x0.rank() > 0) ts.emplace_back(1.0, x0);
      for (int j = 0; j < k; ++j) ts.emplace_back(y(j), basis[j]);
      x = rounded(ts);
    } else {
      std::vector<Term> ts;
      for (int j = 0; j < k; ++j) ts.emplace_back(y(j), basis[j]);
      FactoredMatrix e = rounded(ts);
      FactoredMatrix me = rounded({Term(1.0, m->apply(e))});
      std::vector<Term> xs;
      if (x0.rank() > 0) xs.emplace_back(1.0, x0);
      if (me.rank() > 0) xs.emplace_back(1.0, me);
      x = rounded(xs);
    }
    rep.iterations = k;

    const double res_norm = rounded(residual_terms(op, x, b)).norm();
    const double eta = eta_of(res_norm, norm_a, x.norm(), b.norm());
    rep.eta_history.push_back(eta);
    if (eta <= cfg.delta) {
      rep.converged = true;
      break;
    }
    if (breakdown) break;
  }
  return {x, rep};
}

std::pair<FactoredMatrix, SolveReport> restarted(
    const MultitermOperator& op, const PrecondFactory& make_precond,
    const FactoredMatrix& b, const FactoredMatrix& x0, const GmresConfig& cfg,
    double norm_a) {
  SolveReport total;
  FactoredMatrix x = x0;
  for (int cycle = 1; cycle <= cfg.maxit; ++cycle) {
    PrecondPtr m = make_precond ? make_precond(cycle, x) : nullptr;
    auto [xc, rep] = lr_gmres_cycle(op, m.get(), b, x, cfg, norm_a);
    x = std::move(xc);
    total.iterations += rep.iterations;
    total.max_krylov_rank = std::max(total.max_krylov_rank, rep.max_krylov_rank);
    total.eta_history.insert(total.eta_history.end(), rep.eta_history.begin(),
                             rep.eta_history.end());
    total.restart_cycles = cycle;
    total.cycle_preconds.push_back(m ? m->name() : "none");
    if (rep.converged) {
      total.converged = true;
      break;
    }
  }
  return {x, total};
}

}  // namespace

double backward_error(const MultitermOperator& op, const FactoredMatrix& x,
                      const FactoredMatrix& b, double norm_estimate,
                      double eps) {
  FactoredMatrix r = round_terms(residual_terms(op, x, b), eps, op.rows(), op.cols());
  return eta_of(r.norm(), norm_estimate, x.norm(), b.norm());
}

std::pair<Eigen::VectorXd, SolveReport> dense_gmres(const DenseMap& a,
                                                    const Eigen::VectorXd& b,
                                                    const Eigen::VectorXd& x0,
                                                    const GmresConfig& cfg,
                                                    double norm_estimate) {
  SolveReport rep;
  Eigen::VectorXd r0 = b - a(x0);
  const double beta = r0.norm();
  if (beta == 0.0) {
    rep.converged = true;
    rep.eta_history.push_back(0.0);
    return {x0, rep};
  }

  std::vector<Eigen::VectorXd> basis{r0 / beta};
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(cfg.m + 1, cfg.m);
  Eigen::VectorXd x = x0;
  for (int k = 1; k <= cfg.m; ++k) {
    Eigen::VectorXd w = a(basis[k - 1]);
    for (int i = 0; i < k; ++i) {
      hess(i, k - 1) = basis[i].dot(w);
      w -= hess(i, k - 1) * basis[i];
    }
    hess(k, k - 1) = w.norm();
    const bool breakdown = hess(k, k - 1) <= kBreakdownFactor * beta;
    if (!breakdown) basis.push_back(w / hess(k, k - 1));

    Eigen::VectorXd ls_rhs = Eigen::VectorXd::Zero(k + 1);
    ls_rhs(0) = beta;
    Eigen::VectorXd y = hess.topLeftCorner(k + 1, k).householderQr().solve(ls_rhs);
    x = x0;
    for (int j = 0; j < k; ++j) x += y(j) * basis[j];
    rep.iterations = k;

    const double eta = eta_of((a(x) - b).norm(), norm_estimate, x.norm(), b.norm());
    rep.eta_history.push_back(eta);
    if (eta <= cfg.delta) {
      rep.converged = true;
      break;
    }
    if (breakdown) break;
  }
  return {x, rep};
}

std::pair<FactoredMatrix, SolveReport> lr_gmres(const MultitermOperator& op,
                                                const FactoredMatrix& b,
                                                const FactoredMatrix& x0,
                                                const GmresConfig& cfg,
                                                double norm_estimate) {
  return lr_gmres_cycle(op, nullptr, b, x0, cfg, norm_estimate);
}

std::pair<FactoredMatrix, SolveReport> plr_gmres(const MultitermOperator& op,
                                                 const Preconditioner& m,
                                                 const FactoredMatrix& b,
                                                 const FactoredMatrix& x0,
                                                 const GmresConfig& cfg,
                                                 double norm_estimate) {
  return lr_gmres_cycle(op, &m, b, x0, cfg, norm_estimate);
}

std::pair<FactoredMatrix, SolveReport> restarted_lr_gmres(
    const MultitermOperator& op, const FactoredMatrix& b,
    const FactoredMatrix& x0, const GmresConfig& cfg, double norm_estimate) {
  return restarted(op, nullptr, b, x0, cfg, norm_estimate);
}

std::pair<FactoredMatrix, SolveReport> rplr_gmres(
    const MultitermOperator& op, const PrecondFactory& make_precond,
    const FactoredMatrix& b, const FactoredMatrix& x0, const GmresConfig& cfg,
    double norm_estimate) {
  return restarted(op, make_precond, b, x0, cfg, norm_estimate);
}

}  // namespace lrme
