#ifndef LRME_GMRES_HPP
#define LRME_GMRES_HPP

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lrme/lowrank.hpp"
#include "lrme/matequation.hpp"

namespace lrme {

struct GmresConfig {
  double eps = 1e-10;   // rounding tolerance
  double delta = 1e-8;  // stopping tolerance on the backward error
  int m = 3;            // inner iterations per cycle
  int maxit = 30;       // restart cycles
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;        // total inner iterations
  int max_krylov_rank = 0;   // max rank over all rounded intermediates
  std::vector<double> eta_history;
  int restart_cycles = 0;
  std::vector<std::string> cycle_preconds;
};

// Right preconditioner for factored matrices. BUG instances are nonlinear in
// the anchor, so restarted drivers take a factory instead of a fixed map.
class Preconditioner {
public:
  virtual ~Preconditioner() = default;
  virtual FactoredMatrix apply(const FactoredMatrix& b) const = 0;
  virtual std::string name() const = 0;
};

using PrecondPtr = std::shared_ptr<const Preconditioner>;

// Invoked once per restart cycle (1-based) with the current iterate.
// Returning nullptr runs the cycle unpreconditioned.
using PrecondFactory =
    std::function<PrecondPtr(int cycle, const FactoredMatrix& current)>;

using DenseMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// MGS-GMRES on vectors; the reference oracle for the low-rank solvers.
std::pair<Eigen::VectorXd, SolveReport> dense_gmres(const DenseMap& a,
                                                    const Eigen::VectorXd& b,
                                                    const Eigen::VectorXd& x0,
                                                    const GmresConfig& cfg,
                                                    double norm_estimate);

std::pair<FactoredMatrix, SolveReport> lr_gmres(const MultitermOperator& op,
                                                const FactoredMatrix& b,
                                                const FactoredMatrix& x0,
                                                const GmresConfig& cfg,
                                                double norm_estimate);

std::pair<FactoredMatrix, SolveReport> plr_gmres(const MultitermOperator& op,
                                                 const Preconditioner& m,
                                                 const FactoredMatrix& b,
                                                 const FactoredMatrix& x0,
                                                 const GmresConfig& cfg,
                                                 double norm_estimate);

std::pair<FactoredMatrix, SolveReport> restarted_lr_gmres(
    const MultitermOperator& op, const FactoredMatrix& b,
    const FactoredMatrix& x0, const GmresConfig& cfg, double norm_estimate);

std::pair<FactoredMatrix, SolveReport> rplr_gmres(
    const MultitermOperator& op, const PrecondFactory& make_precond,
    const FactoredMatrix& b, const FactoredMatrix& x0, const GmresConfig& cfg,
    double norm_estimate);

// Backward error ||A x - b|| / (||A||_2 ||x|| + ||b||) with the numerator
// formed by rounding at eps.
double backward_error(const MultitermOperator& op, const FactoredMatrix& x,
                      const FactoredMatrix& b, double norm_estimate,
                      double eps);

}  // namespace lrme

#endif
