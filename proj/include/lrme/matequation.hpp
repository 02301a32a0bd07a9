#ifndef LRME_MATEQUATION_HPP
#define LRME_MATEQUATION_HPP

#include <Eigen/Sparse>
#include <cstdint>
#include <vector>

#include "lrme/lowrank.hpp"

namespace lrme {

using SpMat = Eigen::SparseMatrix<double>;

// Linear operator X -> sum_j C_j X D_j^T given by coefficient pairs.
struct MultitermOperator {
  std::vector<std::pair<SpMat, SpMat>> terms;

  Index rows() const { return terms.front().first.rows(); }
  Index cols() const { return terms.front().second.rows(); }

  static MultitermOperator identity(Index rows, Index cols);
};

struct OperatorNormEstimate {
  double value = 0.0;
  int sample_count = 0;
  std::uint64_t seed = 0;
};

// Factor-wise operator application: one term (C_j U, s, D_j V) per summand.
std::vector<Term> applied_terms(const MultitermOperator& op,
                                const FactoredMatrix& x);

FactoredMatrix apply_lowrank(const MultitermOperator& op,
                             const FactoredMatrix& x, double eps);

Eigen::MatrixXd apply_dense(const MultitermOperator& op,
                            const Eigen::MatrixXd& x);

// Max Frobenius norm of the operator over 10 normal and 10 uniform(0,1)
// samples, each normalized to unit Frobenius norm.
OperatorNormEstimate estimate_norm(const MultitermOperator& op,
                                   std::uint64_t seed);

// Solves sum_j C_j K (V^T D_j^T V) = rhs for K (rows x r) via the
// vectorized Kronecker system.
Eigen::MatrixXd solve_k_system(const MultitermOperator& op,
                               const Eigen::MatrixXd& v,
                               const Eigen::MatrixXd& rhs);

// Mirror problem sum_j D_j L (U^T C_j^T U) = rhs for L (cols x r).
Eigen::MatrixXd solve_l_system(const MultitermOperator& op,
                               const Eigen::MatrixXd& u,
                               const Eigen::MatrixXd& rhs);

// Solves sum_j (U^T C_j U) S (V^T D_j^T V) = rhs for the r x r core.
Eigen::MatrixXd solve_galerkin_system(const MultitermOperator& op,
                                      const Eigen::MatrixXd& u,
                                      const Eigen::MatrixXd& v,
                                      const Eigen::MatrixXd& rhs);

}  // namespace lrme

#endif
