#ifndef LRME_REFERENCE_HPP
#define LRME_REFERENCE_HPP

#include <memory>
#include <vector>

#include "lrme/fdm.hpp"
#include "lrme/timestep.hpp"

namespace lrme {

// Direct sparse solver for the vectorized implicit system
// vec(X) - dt_coef * sum_j (B_j kron A_j) vec(X) = vec(b).
class DenseImplicitSolver {
public:
  DenseImplicitSolver(const std::vector<std::pair<SpMat, SpMat>>& f_terms,
                      double dt_coef);

  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

private:
  Index rows_, cols_;
  std::unique_ptr<Eigen::SparseLU<SpMat>> lu_;
  SpMat system_;
};

Eigen::MatrixXd dense_apply_terms(
    const std::vector<std::pair<SpMat, SpMat>>& f_terms,
    const Eigen::MatrixXd& x);

struct DenseRunResult {
  std::vector<Eigen::MatrixXd> states;  // X^0 .. X^{n_t}
  std::vector<double> times;
  std::vector<double> errors;  // empty without a manufactured solution
};

// Full-rank time integration with direct implicit solves; the oracle for the
// low-rank integrator. Uses the same step count rule n_t = floor(t_end / h).
DenseRunResult dense_run(const ProblemSpec& spec, const Grid& grid,
                         const SchemeSpec& scheme);

// Numerical ranks of the snapshots at the given absolute tail threshold.
std::vector<int> rank_profile(const std::vector<Eigen::MatrixXd>& states,
                              double eps);

}  // namespace lrme

#endif
