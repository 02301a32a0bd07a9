#include "lrme/timestep.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lrme {

namespace {

// Gathers weighted factored matrices and rounds them in one pass.
class TermAccumulator {
public:
  TermAccumulator(Index rows, Index cols) : rows_(rows), cols_(cols) {}

  void add(double w, const FactoredMatrix& x) {
    if (w != 0.0 && x.rank() > 0) terms_.emplace_back(w, x);
  }
  void add_applied(const std::vector<std::pair<SpMat, SpMat>>& f_terms,
                   const FactoredMatrix& x, double w) {
    if (w == 0.0 || x.rank() == 0) return;
    MultitermOperator op{f_terms};
    for (Term& t : applied_terms(op, x)) {
      t.weight *= w;
      terms_.push_back(std::move(t));
    }
  }
  FactoredMatrix round(double eps) const {
    return round_terms(terms_, eps, rows_, cols_);
  }

private:
  Index rows_, cols_;
  std::vector<Term> terms_;
};

void merge_report(SolveReport& total, const SolveReport& r) {
  total.converged = total.converged && r.converged;
  total.iterations += r.iterations;
  total.max_krylov_rank = std::max(total.max_krylov_rank, r.max_krylov_rank);
  if (!r.eta_history.empty()) total.eta_history.push_back(r.eta_history.back());
  total.restart_cycles += r.restart_cycles;
  total.cycle_preconds.insert(total.cycle_preconds.end(),
                              r.cycle_preconds.begin(), r.cycle_preconds.end());
}

}  // namespace

DirkTableau DirkTableau::backward_euler() {
  DirkTableau t;
  t.a = Eigen::MatrixXd::Ones(1, 1);
  t.b = Eigen::VectorXd::Ones(1);
  t.c = Eigen::VectorXd::Ones(1);
  t.order = 1;
  return t;
}

DirkTableau DirkTableau::crouzeix4() {
  const double g = 0.5 + std::cos(M_PI / 18.0) / std::sqrt(3.0);
  const double w = 1.0 / (6.0 * (1.0 - 2.0 * g) * (1.0 - 2.0 * g));
  DirkTableau t;
  t.a = Eigen::MatrixXd::Zero(3, 3);
  t.a << g, 0.0, 0.0,
         0.5 - g, g, 0.0,
         2.0 * g, 1.0 - 4.0 * g, g;
  t.b = Eigen::Vector3d(w, 1.0 - 2.0 * w, w);
  t.c = Eigen::Vector3d(g, 0.5, 1.0 - g);
  t.order = 4;
  return t;
}

SchemeSpec SchemeSpec::midpoint(double theta) {
  SchemeSpec s;
  s.kind = Kind::Midpoint;
  s.order = (theta == 0.5) ? 2 : 1;
  s.theta = theta;
  return s;
}

SchemeSpec SchemeSpec::bdf(int steps) {
  SchemeSpec s;
  s.kind = Kind::Bdf;
  s.order = steps;
  switch (steps) {
    case 1:
      s.bdf_alpha = Eigen::VectorXd::Ones(1);
      s.bdf_beta = 1.0;
      break;
    case 2:
      s.bdf_alpha = Eigen::Vector2d(4.0 / 3.0, -1.0 / 3.0);
      s.bdf_beta = 2.0 / 3.0;
      break;
    case 3:
      s.bdf_alpha = Eigen::Vector3d(18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0);
      s.bdf_beta = 6.0 / 11.0;
      break;
    case 4:
      s.bdf_alpha =
          Eigen::Vector4d(48.0 / 25.0, -36.0 / 25.0, 16.0 / 25.0, -3.0 / 25.0);
      s.bdf_beta = 12.0 / 25.0;
      break;
    default:
      throw std::invalid_argument("SchemeSpec::bdf: steps must be in 1..4");
  }
  return s;
}

SchemeSpec SchemeSpec::dirk(DirkTableau tableau) {
  SchemeSpec s;
  s.kind = Kind::Dirk;
  s.order = tableau.order;
  s.tableau = std::move(tableau);
  return s;
}

TolerancePolicy tolerance_for(double h, int scheme_order) {
  if (!(h > 0.0)) throw std::invalid_argument("tolerance_for: h must be > 0");
  if (scheme_order != 2 && scheme_order != 4)
    throw std::invalid_argument("tolerance_for: order must be 2 or 4");
  TolerancePolicy p;
  p.eps = std::pow(h, scheme_order + 1);
  p.eps2 = std::pow(h, scheme_order);
  p.delta = p.eps;
  return p;
}

TolerancePolicy resolve_policy(double h, int scheme_order,
                               const RunOptions& opt) {
  TolerancePolicy p = tolerance_for(h, scheme_order);
  if (opt.eps) p.eps = *opt.eps;
  if (opt.eps2) p.eps2 = *opt.eps2;
  if (opt.delta) p.delta = *opt.delta;
  p.eps *= opt.eps_scale;
  p.eps2 *= opt.eps2_scale;
  p.delta *= opt.delta_scale;
  return p;
}

ImplicitStepSolver::ImplicitStepSolver(
    std::vector<std::pair<SpMat, SpMat>> f_terms, double dt_coef,
    PrecondChoice precond, std::shared_ptr<const EsPreconditioner> es,
    const TolerancePolicy& policy, int restart_m, int maxit,
    std::uint64_t seed)
    : precond_(precond), es_(std::move(es)) {
  if (f_terms.empty())
    throw std::invalid_argument("ImplicitStepSolver: empty operator");
  const Index n = f_terms.front().first.rows();
  const Index m = f_terms.front().second.rows();
  SpMat in(n, n), im(m, m);
  in.setIdentity();
  im.setIdentity();
  op_.terms.emplace_back(in, im);
  for (auto& [a, b] : f_terms)
    op_.terms.emplace_back(SpMat(-dt_coef * a), std::move(b));
  norm_est_ = estimate_norm(op_, seed).value;
  cfg_.eps = policy.eps;
  cfg_.delta = policy.delta;
  cfg_.m = restart_m;
  cfg_.maxit = maxit;
  if ((precond_ == PrecondChoice::Es || precond_ == PrecondChoice::Hybrid) &&
      !es_)
    throw std::invalid_argument("ImplicitStepSolver: ES preconditioner missing");
}

std::pair<FactoredMatrix, SolveReport> ImplicitStepSolver::solve(
    const FactoredMatrix& b, const FactoredMatrix& guess) const {
  switch (precond_) {
    case PrecondChoice::None:
      return restarted_lr_gmres(op_, b, guess, cfg_, norm_est_);
    case PrecondChoice::Bug:
      return rplr_gmres(op_, bug_factory(op_), b, guess, cfg_, norm_est_);
    case PrecondChoice::Es:
      return rplr_gmres(op_, fixed_factory(es_), b, guess, cfg_, norm_est_);
    case PrecondChoice::Hybrid:
      return rplr_gmres(op_, hybrid_factory(op_, es_), b, guess, cfg_,
                        norm_est_);
  }
  throw std::logic_error("ImplicitStepSolver: unknown preconditioner choice");
}

StepResult step_midpoint(const FactoredMatrix& state,
                         const std::vector<std::pair<SpMat, SpMat>>& f_terms,
                         const FactoredMatrix& forcing_mid, double dt,
                         double theta, const TolerancePolicy& policy,
                         const ImplicitStepSolver& solver) {
  TermAccumulator acc(state.rows(), state.cols());
  acc.add(1.0, state);
  acc.add_applied(f_terms, state, dt * (1.0 - theta));
  acc.add(dt, forcing_mid);
  const FactoredMatrix b = acc.round(policy.eps);
  auto [x, report] = solver.solve(b, state);
  StepResult out;
  out.x = round_terms({Term(1.0, x)}, policy.eps2, x.rows(), x.cols());
  out.report = std::move(report);
  return out;
}

StepResult step_bdf(const std::deque<FactoredMatrix>& states,
                    const std::vector<std::pair<SpMat, SpMat>>& f_terms,
                    const FactoredMatrix& forcing_next, double dt,
                    const SchemeSpec& scheme, const TolerancePolicy& policy,
                    const ImplicitStepSolver& solver) {
  const Index l = scheme.bdf_alpha.size();
  if (Index(states.size()) < l)
    throw std::invalid_argument("step_bdf: insufficient history");
  const Index rows = states.front().rows(), cols = states.front().cols();
  TermAccumulator hist(rows, cols);
  for (Index j = 0; j < l; ++j) hist.add(scheme.bdf_alpha(j), states[j]);
  const FactoredMatrix guess = hist.round(policy.eps);
  TermAccumulator acc(rows, cols);
  acc.add(1.0, guess);
  acc.add(dt * scheme.bdf_beta, forcing_next);
  const FactoredMatrix b = acc.round(policy.eps);
  auto [x, report] = solver.solve(b, guess);
  StepResult out;
  out.x = round_terms({Term(1.0, x)}, policy.eps2, rows, cols);
  out.report = std::move(report);
  return out;
}

DirkStepResult step_dirk(const FactoredMatrix& state,
                         const std::vector<FactoredMatrix>& prev_stages,
                         const std::vector<std::pair<SpMat, SpMat>>& f_terms,
                         const std::function<FactoredMatrix(double)>& forcing_at,
                         double t, double dt, const DirkTableau& tableau,
                         const TolerancePolicy& policy,
                         const ImplicitStepSolver& solver,
                         DirkGuessPolicy guess_policy) {
  const Index rows = state.rows(), cols = state.cols();
  const Index s = tableau.b.size();
  DirkStepResult out;
  out.report.converged = true;
  std::vector<FactoredMatrix> slopes;  // F^(i) = L X^(i) + G(t_i)
  for (Index i = 0; i < s; ++i) {
    const double ti = t + tableau.c(i) * dt;
    const FactoredMatrix gi = forcing_at(ti);
    TermAccumulator acc(rows, cols);
    acc.add(1.0, state);
    for (Index j = 0; j < i; ++j) acc.add(dt * tableau.a(i, j), slopes[j]);
    acc.add(dt * tableau.a(i, i), gi);
    const FactoredMatrix b = acc.round(policy.eps);
    const FactoredMatrix& guess =
        (guess_policy == DirkGuessPolicy::PreviousStage &&
         Index(prev_stages.size()) == s)
            ? prev_stages[i]
            : state;
    auto [xi, report] = solver.solve(b, guess);
    merge_report(out.report, report);
    TermAccumulator slope(rows, cols);
    slope.add_applied(f_terms, xi, 1.0);
    slope.add(1.0, gi);
    slopes.push_back(slope.round(policy.eps));
    out.stages.push_back(std::move(xi));
  }
  TermAccumulator acc(rows, cols);
  acc.add(1.0, state);
  for (Index i = 0; i < s; ++i) acc.add(dt * tableau.b(i), slopes[i]);
  out.x = acc.round(policy.eps2);
  return out;
}

StepHistory run_integration(const ProblemSpec& spec, const Grid& grid,
                            const SchemeSpec& scheme, const RunOptions& opt) {
  const double h = grid.hx;
  const TolerancePolicy policy = resolve_policy(h, scheme.order, opt);
  const auto f_terms = assemble_operator_terms(spec, grid);

  const int n_t = std::max(1, int(std::floor(spec.t_end / h)));
  const double dt = spec.t_end / n_t;

  double dt_coef = 0.0;
  switch (scheme.kind) {
    case SchemeSpec::Kind::Midpoint: dt_coef = dt * scheme.theta; break;
    case SchemeSpec::Kind::Bdf: dt_coef = dt * scheme.bdf_beta; break;
    case SchemeSpec::Kind::Dirk: dt_coef = dt * scheme.tableau.a(0, 0); break;
  }

  std::shared_ptr<const EsPreconditioner> es;
  if (opt.precond == PrecondChoice::Es || opt.precond == PrecondChoice::Hybrid) {
    auto [cbar, dbar] = es_operator_parts(spec, grid);
    auto [delta_star, t_max] =
        es_parameters_for_problem(dt_coef, h, spec.contrast_eta);
    EsPreconditioner built = EsPreconditioner::build(cbar, dbar, dt_coef,
                                                     delta_star, t_max,
                                                     policy.eps);
    if (opt.es_max_rank > 0) built.set_max_rank(opt.es_max_rank);
    es = std::make_shared<const EsPreconditioner>(std::move(built));
  }
  const ImplicitStepSolver solver(f_terms, dt_coef, opt.precond, es, policy,
                                  opt.restart_m, opt.maxit, opt.seed);

  const auto forcing_at = [&](double t) {
    return assemble_forcing(spec, grid, t, policy.eps);
  };
  const auto record_for = [&](int step, double t, const FactoredMatrix& x,
                              const SolveReport& rep) {
    StepRecord r;
    r.step = step;
    r.time = t;
    if (spec.has_exact()) {
      const FactoredMatrix xe = exact_solution_on_grid(spec, grid, t, 1e-14);
      const double d2 = x.norm() * x.norm() + xe.norm() * xe.norm() -
                        2.0 * inner(x, xe);
      r.error = std::sqrt(grid.hx * grid.hy) * std::sqrt(std::max(d2, 0.0));
    } else {
      r.error = std::numeric_limits<double>::quiet_NaN();
    }
    r.eta = rep.eta_history.empty() ? 0.0 : rep.eta_history.back();
    r.solution_rank = int(x.rank());
    r.max_krylov_rank = rep.max_krylov_rank;
    r.iterations = rep.iterations;
    r.converged = rep.converged;
    return r;
  };

  FactoredMatrix x = spec.has_exact()
                         ? exact_solution_on_grid(spec, grid, 0.0, policy.eps2)
                         : initial_condition_on_grid(spec, grid, policy.eps2);
  StepHistory hist;
  hist.records.push_back(record_for(0, 0.0, x, SolveReport{true, 0, 0, {}, 0, {}}));

  std::deque<FactoredMatrix> bdf_states{x};  // most recent first
  std::vector<FactoredMatrix> dirk_stages;
  const int startup =
      (scheme.kind == SchemeSpec::Kind::Bdf) ? int(scheme.bdf_alpha.size()) - 1
                                             : 0;

  // Startup history of a multistep run: exact snapshots when a manufactured
  // solution exists, otherwise a DIRK4 bootstrap at the same tolerances.
  std::optional<ImplicitStepSolver> boot_solver;
  DirkTableau boot_tableau;
  if (startup > 0 && (opt.bdf_seed_dirk || !spec.has_exact())) {
    boot_tableau = DirkTableau::crouzeix4();
    boot_solver.emplace(f_terms, dt * boot_tableau.a(0, 0), opt.precond, es,
                        policy, opt.restart_m, opt.maxit, opt.seed);
  }

  double t = 0.0;
  for (int step = 1; step <= n_t; ++step) {
    if (scheme.kind == SchemeSpec::Kind::Midpoint) {
      StepResult r = step_midpoint(x, f_terms, forcing_at(t + 0.5 * dt), dt,
                                   scheme.theta, policy, solver);
      x = std::move(r.x);
      hist.records.push_back(record_for(step, t + dt, x, r.report));
    } else if (scheme.kind == SchemeSpec::Kind::Dirk) {
      DirkStepResult r =
          step_dirk(x, dirk_stages, f_terms, forcing_at, t, dt,
                    scheme.tableau, policy, solver, opt.dirk_guess);
      x = std::move(r.x);
      dirk_stages = std::move(r.stages);
      hist.records.push_back(record_for(step, t + dt, x, r.report));
    } else if (step <= startup) {
      if (boot_solver) {
        DirkStepResult r =
            step_dirk(x, dirk_stages, f_terms, forcing_at, t, dt,
                      boot_tableau, policy, *boot_solver, opt.dirk_guess);
        x = std::move(r.x);
        dirk_stages = std::move(r.stages);
        hist.records.push_back(record_for(step, t + dt, x, r.report));
      } else {
        x = exact_solution_on_grid(spec, grid, t + dt, policy.eps2);
        hist.records.push_back(
            record_for(step, t + dt, x, SolveReport{true, 0, 0, {}, 0, {}}));
      }
      bdf_states.push_front(x);
    } else {
      StepResult r = step_bdf(bdf_states, f_terms, forcing_at(t + dt), dt,
                              scheme, policy, solver);
      x = r.x;
      bdf_states.push_front(std::move(r.x));
      while (Index(bdf_states.size()) > scheme.bdf_alpha.size())
        bdf_states.pop_back();
      hist.records.push_back(record_for(step, t + dt, x, r.report));
    }
    t += dt;
  }
  return hist;
}

}  // namespace lrme
