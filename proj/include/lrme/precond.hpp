#ifndef LRME_PRECOND_HPP
#define LRME_PRECOND_HPP

#include <memory>

#include "lrme/gmres.hpp"
#include "lrme/lowrank.hpp"
#include "lrme/matequation.hpp"

namespace lrme {

class IdentityPreconditioner final : public Preconditioner {
public:
  FactoredMatrix apply(const FactoredMatrix& b) const override { return b; }
  std::string name() const override { return "identity"; }
};

// Basis-update-and-Galerkin preconditioner anchored at a factored iterate.
// Nonlinear: the output depends on the anchor factors, and its rank equals
// the anchor rank. A singular projected solve degrades to returning b.
class BugPreconditioner final : public Preconditioner {
public:
  BugPreconditioner(const MultitermOperator& op, const FactoredMatrix& anchor);

  FactoredMatrix apply(const FactoredMatrix& b) const override;
  std::string name() const override { return "bug"; }

  Index anchor_rank() const { return anchor_.rank(); }
  bool fallback_hit() const { return fallback_hit_; }

private:
  const MultitermOperator& op_;
  FactoredMatrix anchor_;
  mutable bool fallback_hit_ = false;
};

// Quadrature parameters of the exponential-sum approximation of 1/t.
struct EsQuadrature {
  double alpha = 0.0;
  int m_plus = 0;   // upper summation index
  int n_minus = 0;  // lower summation index
};

EsQuadrature es_quadrature(double delta0, double eta_split, double t_max);

// S(t) = alpha * sum_{k=-n}^{m} e^{k alpha} exp(-e^{k alpha} t).
double es_scalar_sum(const EsQuadrature& q, double t);

// (delta_star, T) for a time step tau, mesh h and contrast parameter;
// T = 4 tau / (eta^2 h^2), floored at 2 so the scalar lemma applies.
std::pair<double, double> es_parameters_for_problem(double tau, double h,
                                                    double contrast_eta);

// Approximate inverse of I kron I - tau (I kron Cbar + Dbar kron I) as a sum
// of Kronecker products of matrix exponentials of A1 = 0.5 I - tau Cbar and
// A2 = 0.5 I - tau Dbar.
class EsPreconditioner final : public Preconditioner {
public:
  static EsPreconditioner build(const SpMat& cbar, const SpMat& dbar,
                                double tau, double delta_star, double t_max,
                                double eps);

  FactoredMatrix apply(const FactoredMatrix& b) const override;
  std::string name() const override { return "es"; }

  const EsQuadrature& quadrature() const { return quad_; }
  int term_count() const { return int(weights_.size()); }

  // Maximal output rank of apply (0 = tolerance-only rounding).
  void set_max_rank(Index r) { max_rank_ = r; }
  Index max_rank() const { return max_rank_; }

private:
  EsPreconditioner() = default;
  EsQuadrature quad_;
  std::vector<double> weights_;               // alpha * e^{k alpha}
  std::vector<Eigen::MatrixXd> exp_a1_;       // exp(-e^{k alpha} A1)
  std::vector<Eigen::MatrixXd> exp_a2_;       // exp(-e^{k alpha} A2)
  double eps_ = 0.0;
  Index max_rank_ = 0;
};

// Restart-cycle policies for rplr_gmres.
PrecondFactory identity_factory();
PrecondFactory fixed_factory(PrecondPtr m);
// Re-anchors a BUG preconditioner at the current iterate every cycle;
// falls back to identity while the iterate has rank 0.
PrecondFactory bug_factory(const MultitermOperator& op);
// Odd cycles apply the fixed ES preconditioner, even cycles a BUG
// preconditioner anchored at the current iterate.
PrecondFactory hybrid_factory(const MultitermOperator& op, PrecondPtr es);

inline std::pair<FactoredMatrix, SolveReport> hybrid_rplr_gmres(
    const MultitermOperator& op, PrecondPtr es, const FactoredMatrix& b,
    const FactoredMatrix& x0, const GmresConfig& cfg, double norm_estimate) {
  return rplr_gmres(op, hybrid_factory(op, std::move(es)), b, x0, cfg,
                    norm_estimate);
}

}  // namespace lrme

#endif
