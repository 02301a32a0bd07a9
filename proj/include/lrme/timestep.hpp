#ifndef LRME_TIMESTEP_HPP
#define LRME_TIMESTEP_HPP

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "lrme/fdm.hpp"
#include "lrme/gmres.hpp"
#include "lrme/precond.hpp"

namespace lrme {

struct DirkTableau {
  Eigen::MatrixXd a;  // lower triangular, positive diagonal
  Eigen::VectorXd b, c;
  int order = 0;

  static DirkTableau backward_euler();
  static DirkTableau crouzeix4();  // three stages, fourth order
};

struct SchemeSpec {
  enum class Kind { Midpoint, Bdf, Dirk };
  Kind kind = Kind::Midpoint;
  int order = 2;
  double theta = 0.5;         // implicit weight of the midpoint scheme
  Eigen::VectorXd bdf_alpha;  // history weights, most recent first
  double bdf_beta = 0.0;
  DirkTableau tableau;

  static SchemeSpec midpoint(double theta = 0.5);
  static SchemeSpec bdf(int steps);
  static SchemeSpec dirk(DirkTableau tableau);
};

struct TolerancePolicy {
  double eps = 0.0;    // rounding tolerance inside the solver
  double eps2 = 0.0;   // post-step truncation tolerance
  double delta = 0.0;  // stopping tolerance, equal to eps
};

// eps = h^(order+1), eps2 = h^order, delta = eps; orders 2 and 4 supported.
TolerancePolicy tolerance_for(double h, int scheme_order);

enum class PrecondChoice { None, Bug, Es, Hybrid };

enum class DirkGuessPolicy { PreviousStage, CurrentState };

struct StepRecord {
  int step = 0;
  double time = 0.0;
  double error = 0.0;  // scaled-L2 error vs the manufactured solution, NaN if none
  double eta = 0.0;
  int solution_rank = 0;
  int max_krylov_rank = 0;
  int iterations = 0;
  bool converged = true;
};

struct StepHistory {
  std::vector<StepRecord> records;
};

struct RunOptions {
  PrecondChoice precond = PrecondChoice::Bug;
  int restart_m = 3;
  int maxit = 30;
  std::uint64_t seed = 20250823;
  std::optional<double> eps, eps2, delta;  // explicit overrides
  double eps_scale = 1.0, eps2_scale = 1.0, delta_scale = 1.0;
  DirkGuessPolicy dirk_guess = DirkGuessPolicy::PreviousStage;
  bool bdf_seed_dirk = false;  // seed BDF startup by DIRK4 instead of the exact solution
  int es_max_rank = 0;  // maximal rank of the ES apply (0 = tolerance only)
};

TolerancePolicy resolve_policy(double h, int scheme_order, const RunOptions& opt);

// Implicit-solve context shared across the steps of a run: the implicit
// operator X - dt*coef*sum A_j X B_j^T, its norm estimate, and the
// preconditioner policy.
class ImplicitStepSolver {
public:
  ImplicitStepSolver(std::vector<std::pair<SpMat, SpMat>> f_terms,
                     double dt_coef, PrecondChoice precond,
                     std::shared_ptr<const EsPreconditioner> es,
                     const TolerancePolicy& policy, int restart_m, int maxit,
                     std::uint64_t seed);

  // Solves op(x) = b starting from (and, for BUG, anchored at) the guess.
  std::pair<FactoredMatrix, SolveReport> solve(const FactoredMatrix& b,
                                               const FactoredMatrix& guess) const;

  const MultitermOperator& op() const { return op_; }
  double norm_estimate() const { return norm_est_; }

private:
  MultitermOperator op_;
  double norm_est_ = 0.0;
  PrecondChoice precond_;
  std::shared_ptr<const EsPreconditioner> es_;
  GmresConfig cfg_;
};

struct StepResult {
  FactoredMatrix x;
  SolveReport report;
};

StepResult step_midpoint(const FactoredMatrix& state,
                         const std::vector<std::pair<SpMat, SpMat>>& f_terms,
                         const FactoredMatrix& forcing_mid, double dt,
                         double theta, const TolerancePolicy& policy,
                         const ImplicitStepSolver& solver);

// states are X^n, X^{n-1}, ... (most recent first), l entries.
StepResult step_bdf(const std::deque<FactoredMatrix>& states,
                    const std::vector<std::pair<SpMat, SpMat>>& f_terms,
                    const FactoredMatrix& forcing_next, double dt,
                    const SchemeSpec& scheme, const TolerancePolicy& policy,
                    const ImplicitStepSolver& solver);

struct DirkStepResult {
  FactoredMatrix x;
  std::vector<FactoredMatrix> stages;  // inner-stage solutions of this step
  SolveReport report;                  // iterations summed, ranks maxed
};

DirkStepResult step_dirk(const FactoredMatrix& state,
                         const std::vector<FactoredMatrix>& prev_stages,
                         const std::vector<std::pair<SpMat, SpMat>>& f_terms,
                         const std::function<FactoredMatrix(double)>& forcing_at,
                         double t, double dt, const DirkTableau& tableau,
                         const TolerancePolicy& policy,
                         const ImplicitStepSolver& solver,
                         DirkGuessPolicy guess_policy);

StepHistory run_integration(const ProblemSpec& spec, const Grid& grid,
                            const SchemeSpec& scheme, const RunOptions& opt);

}  // namespace lrme

#endif
