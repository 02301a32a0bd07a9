#ifndef LRME_FDM_HPP
#define LRME_FDM_HPP

#include <functional>
#include <string>
#include <vector>

#include "lrme/lowrank.hpp"
#include "lrme/matequation.hpp"

namespace lrme {

// Interior grid of [-1,1]^2 with zero Dirichlet boundaries; h = 2/(n+1).
struct Grid {
  Index nx = 0, ny = 0;
  double hx = 0.0, hy = 0.0;
  Eigen::VectorXd x, y;  // interior node coordinates

  static Grid square(Index n);
};

// Scalar coefficient function with its derivative (numeric fallback when the
// derivative is not supplied).
struct Fun1D {
  std::function<double(double)> v;
  std::function<double(double)> d1;

  double eval(double s) const { return v(s); }
  double deriv(double s) const;
};

Fun1D constant_fun(double value);

// One factor of a separable space-time term: value, first and second spatial
// derivative, and time derivative, all as functions of (coordinate, t).
struct SpaceTimeFactor {
  std::function<double(double, double)> v, ds, d2s, dt;
};

// Rank-1 building block fx(x,t) * gy(y,t) of an exact solution.
struct SeparableTerm {
  SpaceTimeFactor fx, gy;
};

struct CoefficientSet {
  Fun1D a1, a2, a3, a4;  // functions of x
  Fun1D b1, b2, b3, b4;  // functions of y
};

struct ProblemSpec {
  std::string name;
  CoefficientSet coeffs;
  std::vector<SeparableTerm> exact;    // empty when no manufactured solution
  std::vector<SeparableTerm> initial;  // used when exact is empty
  bool zero_forcing = false;
  double t_end = 0.0;
  int fd_order = 2;
  double contrast_eta = 1.0;
  std::vector<Index> grid_sizes;
  std::vector<Index> fine_grid_sizes;  // extras behind the "fine" flag
  std::string default_scheme;          // midpoint | bdf4 | dirk4

  bool has_exact() const { return !exact.empty(); }
};

// First-derivative matrix on the interior grid assuming zero boundary values;
// order 2 or 4 with one-sided 4th-order closures near the boundary.
SpMat first_derivative(Index n, double h, int order);

// Discretization of d/dx (coef(x) d/dx u) under zero Dirichlet conditions.
// Order 2 uses half-point fluxes; order 4 expands to
// coef * u'' + coef' * u' with 4th-order stencils.
SpMat conservative_second_derivative(const std::function<double(double)>& coef,
                                     Index n, double h, int order);

// The four (A_j, B_j) pairs discretizing the variable-coefficient diffusion
// operator of the test equation.
std::vector<std::pair<SpMat, SpMat>> assemble_operator_terms(
    const ProblemSpec& spec, const Grid& grid);

// Diagonal-part operators with domain-averaged coefficients, used to build
// the exponential-sum preconditioner: (avg(a1 b1) * Lxx, avg(a4 b4) * Lyy).
std::pair<SpMat, SpMat> es_operator_parts(const ProblemSpec& spec,
                                          const Grid& grid);

FactoredMatrix eval_terms_on_grid(const std::vector<SeparableTerm>& terms,
                                  const Grid& grid, double t, double eps);

FactoredMatrix exact_solution_on_grid(const ProblemSpec& spec,
                                      const Grid& grid, double t, double eps);

FactoredMatrix initial_condition_on_grid(const ProblemSpec& spec,
                                         const Grid& grid, double eps);

// Forcing G = dX/dt - L(X) of the manufactured solution, assembled from the
// analytic separable factors and rounded at eps. Zero-forcing problems give
// a rank-0 result.
FactoredMatrix assemble_forcing(const ProblemSpec& spec, const Grid& grid,
                                double t, double eps);

ProblemSpec preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace lrme

#endif
