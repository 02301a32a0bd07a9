#include "lrme/reference.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace lrme {

namespace {

SpMat kron(const SpMat& a, const SpMat& b) {
  SpMat out(a.rows() * b.rows(), a.cols() * b.cols());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(std::size_t(a.nonZeros()) * std::size_t(b.nonZeros()));
  for (Index ka = 0; ka < a.outerSize(); ++ka)
    for (SpMat::InnerIterator ia(a, ka); ia; ++ia)
      for (Index kb = 0; kb < b.outerSize(); ++kb)
        for (SpMat::InnerIterator ib(b, kb); ib; ++ib)
          trips.emplace_back(ia.row() * b.rows() + ib.row(),
                             ia.col() * b.cols() + ib.col(),
                             ia.value() * ib.value());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::MatrixXd eval_dense(const std::vector<SeparableTerm>& terms,
                           const Grid& grid, double t) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(grid.nx, grid.ny);
  for (const SeparableTerm& term : terms) {
    Eigen::VectorXd f(grid.nx), g(grid.ny);
    for (Index i = 0; i < grid.nx; ++i) f(i) = term.fx.v(grid.x(i), t);
    for (Index j = 0; j < grid.ny; ++j) g(j) = term.gy.v(grid.y(j), t);
    x += f * g.transpose();
  }
  return x;
}

}  // namespace

DenseImplicitSolver::DenseImplicitSolver(
    const std::vector<std::pair<SpMat, SpMat>>& f_terms, double dt_coef) {
  if (f_terms.empty())
    throw std::invalid_argument("DenseImplicitSolver: empty operator");
  rows_ = f_terms.front().first.rows();
  cols_ = f_terms.front().second.rows();
  SpMat sys(rows_ * cols_, rows_ * cols_);
  sys.setIdentity();
  for (const auto& [a, b] : f_terms) sys -= dt_coef * kron(b, a);
  system_ = sys;
  lu_ = std::make_unique<Eigen::SparseLU<SpMat>>();
  lu_->compute(system_);
  if (lu_->info() != Eigen::Success)
    throw std::runtime_error("DenseImplicitSolver: factorization failed");
}

Eigen::MatrixXd DenseImplicitSolver::solve(const Eigen::MatrixXd& b) const {
  // vec(X) stacks columns, matching the (B kron A) convention above.
  Eigen::VectorXd vb = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  Eigen::VectorXd vx = lu_->solve(vb);
  return Eigen::Map<const Eigen::MatrixXd>(vx.data(), rows_, cols_);
}

Eigen::MatrixXd dense_apply_terms(
    const std::vector<std::pair<SpMat, SpMat>>& f_terms,
    const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (const auto& [a, b] : f_terms) y += a * (b * x.transpose()).transpose();
  return y;
}

DenseRunResult dense_run(const ProblemSpec& spec, const Grid& grid,
                         const SchemeSpec& scheme) {
  const auto f_terms = assemble_operator_terms(spec, grid);
  const int n_t = std::max(1, int(std::floor(spec.t_end / grid.hx)));
  const double dt = spec.t_end / n_t;

  const auto forcing = [&](double t) {
    if (spec.zero_forcing || !spec.has_exact())
      return Eigen::MatrixXd(Eigen::MatrixXd::Zero(grid.nx, grid.ny));
    return Eigen::MatrixXd(to_dense(assemble_forcing(spec, grid, t, 1e-14)));
  };
  const auto exact = [&](double t) { return eval_dense(spec.exact, grid, t); };

  DenseRunResult out;
  Eigen::MatrixXd x = spec.has_exact() ? exact(0.0)
                                       : eval_dense(spec.initial, grid, 0.0);
  const double scale = std::sqrt(grid.hx * grid.hy);
  const auto push = [&](double t, const Eigen::MatrixXd& state) {
    out.states.push_back(state);
    out.times.push_back(t);
    if (spec.has_exact()) out.errors.push_back(scale * (state - exact(t)).norm());
  };
  push(0.0, x);

  if (scheme.kind == SchemeSpec::Kind::Midpoint) {
    DenseImplicitSolver solver(f_terms, dt * scheme.theta);
    for (int step = 1; step <= n_t; ++step) {
      const double t = (step - 1) * dt;
      Eigen::MatrixXd b = x + dt * (1.0 - scheme.theta) *
                                  dense_apply_terms(f_terms, x) +
                          dt * forcing(t + 0.5 * dt);
      x = solver.solve(b);
      push(step * dt, x);
    }
  } else if (scheme.kind == SchemeSpec::Kind::Dirk) {
    const DirkTableau& tab = scheme.tableau;
    DenseImplicitSolver solver(f_terms, dt * tab.a(0, 0));
    for (int step = 1; step <= n_t; ++step) {
      const double t = (step - 1) * dt;
      std::vector<Eigen::MatrixXd> slopes;
      for (Index i = 0; i < tab.b.size(); ++i) {
        const double ti = t + tab.c(i) * dt;
        Eigen::MatrixXd b = x + dt * tab.a(i, i) * forcing(ti);
        for (Index j = 0; j < i; ++j) b += dt * tab.a(i, j) * slopes[j];
        Eigen::MatrixXd xi = solver.solve(b);
        slopes.push_back(dense_apply_terms(f_terms, xi) + forcing(ti));
      }
      for (Index i = 0; i < tab.b.size(); ++i) x += dt * tab.b(i) * slopes[i];
      push(step * dt, x);
    }
  } else {
    const Index l = scheme.bdf_alpha.size();
    DenseImplicitSolver solver(f_terms, dt * scheme.bdf_beta);
    std::vector<Eigen::MatrixXd> states{x};  // most recent first
    for (int step = 1; step <= n_t; ++step) {
      if (step < l) {
        // Startup from the manufactured solution, matching the low-rank run.
        if (!spec.has_exact())
          throw std::invalid_argument(
              "dense_run: BDF startup needs a manufactured solution");
        x = exact(step * dt);
      } else {
        Eigen::MatrixXd b =
            dt * scheme.bdf_beta * forcing(step * dt);
        for (Index j = 0; j < l; ++j) b += scheme.bdf_alpha(j) * states[j];
        x = solver.solve(b);
      }
      states.insert(states.begin(), x);
      if (Index(states.size()) > l) states.pop_back();
      push(step * dt, x);
    }
  }
  return out;
}

std::vector<int> rank_profile(const std::vector<Eigen::MatrixXd>& states,
                              double eps) {
  std::vector<int> ranks;
  ranks.reserve(states.size());
  for (const Eigen::MatrixXd& s : states) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(s);
    const Eigen::VectorXd& sv = svd.singularValues();
    int r = int(sv.size());
    double tail2 = 0.0;
    while (r > 0) {
      const double next = tail2 + sv(r - 1) * sv(r - 1);
      if (std::sqrt(next) > eps) break;
      tail2 = next;
      --r;
    }
    ranks.push_back(r);
  }
  return ranks;
}

}  // namespace lrme
