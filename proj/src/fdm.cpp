#include "lrme/fdm.hpp"

#include <cmath>
#include <stdexcept>

namespace lrme {

namespace {

constexpr double kNumDiffStep = 1e-3;

double numeric_deriv(const std::function<double(double)>& f, double s) {
  const double d = kNumDiffStep;
  return (f(s - 2 * d) - 8 * f(s - d) + 8 * f(s + d) - f(s + 2 * d)) / (12 * d);
}

SpMat from_triplets(Index n, std::vector<Eigen::Triplet<double>>& trips) {
  SpMat m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

void add_row(std::vector<Eigen::Triplet<double>>& trips, Index row, Index n,
             std::initializer_list<std::pair<Index, double>> cols) {
  for (auto [c, v] : cols)
    if (c >= 0 && c < n && v != 0.0) trips.emplace_back(row, c, v);
}

SpMat diag_of(const Fun1D& f, const Eigen::VectorXd& nodes) {
  std::vector<Eigen::Triplet<double>> trips;
  for (Index i = 0; i < nodes.size(); ++i)
    trips.emplace_back(i, i, f.eval(nodes(i)));
  return from_triplets(nodes.size(), trips);
}

// 4th-order second derivative with zero Dirichlet closures.
SpMat second_derivative4(Index n, double h) {
  std::vector<Eigen::Triplet<double>> trips;
  const double s = 1.0 / (12.0 * h * h);
  for (Index i = 0; i < n; ++i) {
    if (i == 0) {
      // biased stencil at the second node of {x0..x5}, boundary value dropped
      add_row(trips, i, n, {{0, -15 * s}, {1, -4 * s}, {2, 14 * s}, {3, -6 * s}, {4, s}});
    } else if (i == n - 1) {
      add_row(trips, i, n,
              {{n - 1, -15 * s}, {n - 2, -4 * s}, {n - 3, 14 * s}, {n - 4, -6 * s}, {n - 5, s}});
    } else if (i == 1 || i == n - 2) {
      add_row(trips, i, n,
              {{i - 2, -s}, {i - 1, 16 * s}, {i, -30 * s}, {i + 1, 16 * s}, {i + 2, -s}});
    } else {
      add_row(trips, i, n,
              {{i - 2, -s}, {i - 1, 16 * s}, {i, -30 * s}, {i + 1, 16 * s}, {i + 2, -s}});
    }
  }
  return from_triplets(n, trips);
}

}  // namespace

Grid Grid::square(Index n) {
  if (n < 3) throw std::invalid_argument("Grid: need at least 3 interior points");
  Grid g;
  g.nx = g.ny = n;
  g.hx = g.hy = 2.0 / double(n + 1);
  g.x.resize(n);
  for (Index i = 0; i < n; ++i) g.x(i) = -1.0 + double(i + 1) * g.hx;
  g.y = g.x;
  return g;
}

double Fun1D::deriv(double s) const {
  return d1 ? d1(s) : numeric_deriv(v, s);
}

Fun1D constant_fun(double value) {
  return {[value](double) { return value; }, [](double) { return 0.0; }};
}

SpMat first_derivative(Index n, double h, int order) {
  if (n < 5) throw std::invalid_argument("first_derivative: grid too small");
  std::vector<Eigen::Triplet<double>> trips;
  if (order == 2) {
    const double s = 1.0 / (2.0 * h);
    for (Index i = 0; i < n; ++i)
      add_row(trips, i, n, {{i - 1, -s}, {i + 1, s}});
  } else if (order == 4) {
    const double s = 1.0 / (12.0 * h);
    for (Index i = 0; i < n; ++i) {
      if (i == 0) {
        add_row(trips, i, n, {{0, -10 * s}, {1, 18 * s}, {2, -6 * s}, {3, s}});
      } else if (i == n - 1) {
        add_row(trips, i, n,
                {{n - 1, 10 * s}, {n - 2, -18 * s}, {n - 3, 6 * s}, {n - 4, -s}});
      } else {
        add_row(trips, i, n,
                {{i - 2, s}, {i - 1, -8 * s}, {i + 1, 8 * s}, {i + 2, -s}});
      }
    }
  } else {
    throw std::invalid_argument("first_derivative: unsupported order");
  }
  return from_triplets(n, trips);
}

SpMat conservative_second_derivative(const std::function<double(double)>& coef,
                                     Index n, double h, int order) {
  if (n < 5)
    throw std::invalid_argument("conservative_second_derivative: grid too small");
  auto node = [&](Index i) { return -1.0 + double(i + 1) * h; };
  if (order == 2) {
    std::vector<Eigen::Triplet<double>> trips;
    const double s = 1.0 / (h * h);
    for (Index i = 0; i < n; ++i) {
      const double am = coef(node(i) - 0.5 * h);
      const double ap = coef(node(i) + 0.5 * h);
      add_row(trips, i, n,
              {{i - 1, am * s}, {i, -(am + ap) * s}, {i + 1, ap * s}});
    }
    return from_triplets(n, trips);
  }
  if (order == 4) {
    std::vector<Eigen::Triplet<double>> da_trips, a_trips;
    for (Index i = 0; i < n; ++i) {
      a_trips.emplace_back(i, i, coef(node(i)));
      da_trips.emplace_back(i, i, numeric_deriv(coef, node(i)));
    }
    SpMat a_diag = from_triplets(n, a_trips);
    SpMat da_diag = from_triplets(n, da_trips);
    return SpMat(a_diag * second_derivative4(n, h)) +
           SpMat(da_diag * first_derivative(n, h, 4));
  }
  throw std::invalid_argument("conservative_second_derivative: unsupported order");
}

std::vector<std::pair<SpMat, SpMat>> assemble_operator_terms(
    const ProblemSpec& spec, const Grid& grid) {
  const auto& c = spec.coeffs;
  SpMat dx = first_derivative(grid.nx, grid.hx, spec.fd_order);
  SpMat dy = first_derivative(grid.ny, grid.hy, spec.fd_order);

  std::vector<std::pair<SpMat, SpMat>> terms;
  terms.emplace_back(
      conservative_second_derivative(c.a1.v, grid.nx, grid.hx, spec.fd_order),
      diag_of(c.b1, grid.y));
  terms.emplace_back(SpMat(dx * diag_of(c.a2, grid.x)),
                     SpMat(diag_of(c.b2, grid.y) * dy));
  terms.emplace_back(SpMat(diag_of(c.a3, grid.x) * dx),
                     SpMat(dy * diag_of(c.b3, grid.y)));
  terms.emplace_back(
      diag_of(c.a4, grid.x),
      conservative_second_derivative(c.b4.v, grid.ny, grid.hy, spec.fd_order));
  return terms;
}

std::pair<SpMat, SpMat> es_operator_parts(const ProblemSpec& spec,
                                          const Grid& grid) {
  auto mean_of = [](const Fun1D& f, const Eigen::VectorXd& nodes) {
    double s = 0.0;
    for (Index i = 0; i < nodes.size(); ++i) s += f.eval(nodes(i));
    return s / double(nodes.size());
  };
  const double cx = mean_of(spec.coeffs.a1, grid.x) * mean_of(spec.coeffs.b1, grid.y);
  const double cy = mean_of(spec.coeffs.a4, grid.x) * mean_of(spec.coeffs.b4, grid.y);
  auto one = [](double) { return 1.0; };
  SpMat lxx = conservative_second_derivative(one, grid.nx, grid.hx, spec.fd_order);
  SpMat lyy = conservative_second_derivative(one, grid.ny, grid.hy, spec.fd_order);
  return {SpMat(cx * lxx), SpMat(cy * lyy)};
}

FactoredMatrix eval_terms_on_grid(const std::vector<SeparableTerm>& terms,
                                  const Grid& grid, double t, double eps) {
  std::vector<Term> ts;
  for (const auto& term : terms) {
    Eigen::MatrixXd xv(grid.nx, 1), yv(grid.ny, 1);
    for (Index i = 0; i < grid.nx; ++i) xv(i, 0) = term.fx.v(grid.x(i), t);
    for (Index j = 0; j < grid.ny; ++j) yv(j, 0) = term.gy.v(grid.y(j), t);
    ts.emplace_back(1.0, xv, Eigen::VectorXd::Ones(1), yv);
  }
  return round_terms(ts, eps, grid.nx, grid.ny);
}

FactoredMatrix exact_solution_on_grid(const ProblemSpec& spec,
                                      const Grid& grid, double t, double eps) {
  if (!spec.has_exact())
    throw std::invalid_argument("exact_solution_on_grid: no manufactured solution");
  return eval_terms_on_grid(spec.exact, grid, t, eps);
}

FactoredMatrix initial_condition_on_grid(const ProblemSpec& spec,
                                         const Grid& grid, double eps) {
  if (spec.has_exact()) return eval_terms_on_grid(spec.exact, grid, 0.0, eps);
  return eval_terms_on_grid(spec.initial, grid, 0.0, eps);
}

FactoredMatrix assemble_forcing(const ProblemSpec& spec, const Grid& grid,
                                double t, double eps) {
  if (spec.zero_forcing || !spec.has_exact())
    return FactoredMatrix::zero(grid.nx, grid.ny);

  const auto& c = spec.coeffs;
  std::vector<Term> ts;
  auto rank1 = [&](double w, const std::function<double(double)>& fx,
                   const std::function<double(double)>& gy) {
    Eigen::MatrixXd xv(grid.nx, 1), yv(grid.ny, 1);
    for (Index i = 0; i < grid.nx; ++i) xv(i, 0) = fx(grid.x(i));
    for (Index j = 0; j < grid.ny; ++j) yv(j, 0) = gy(grid.y(j));
    ts.emplace_back(w, xv, Eigen::VectorXd::Ones(1), yv);
  };

  for (const auto& term : spec.exact) {
    const auto& fx = term.fx;
    const auto& gy = term.gy;
    auto fv = [&](double x) { return fx.v(x, t); };
    auto fs = [&](double x) { return fx.ds(x, t); };
    auto f2 = [&](double x) { return fx.d2s(x, t); };
    auto ft = [&](double x) { return fx.dt(x, t); };
    auto gv = [&](double y) { return gy.v(y, t); };
    auto gs = [&](double y) { return gy.ds(y, t); };
    auto g2 = [&](double y) { return gy.d2s(y, t); };
    auto gt = [&](double y) { return gy.dt(y, t); };

    // time derivative
    rank1(1.0, ft, gv);
    rank1(1.0, fv, gt);
    // b1(y) d/dx (a1 dX/dx)
    rank1(-1.0,
          [&](double x) { return c.a1.deriv(x) * fs(x) + c.a1.eval(x) * f2(x); },
          [&](double y) { return c.b1.eval(y) * gv(y); });
    // b2(y) d^2(a2 X)/dxdy
    rank1(-1.0,
          [&](double x) { return c.a2.deriv(x) * fv(x) + c.a2.eval(x) * fs(x); },
          [&](double y) { return c.b2.eval(y) * gs(y); });
    // a3(x) d^2(b3 X)/dxdy
    rank1(-1.0, [&](double x) { return c.a3.eval(x) * fs(x); },
          [&](double y) { return c.b3.deriv(y) * gv(y) + c.b3.eval(y) * gs(y); });
    // a4(x) d/dy (b4 dX/dy)
    rank1(-1.0, [&](double x) { return c.a4.eval(x) * fv(x); },
          [&](double y) { return c.b4.deriv(y) * gs(y) + c.b4.eval(y) * g2(y); });
  }
  return round_terms(ts, eps, grid.nx, grid.ny);
}

namespace {

Fun1D sin_fun(double base, double amp) {
  return {[=](double s) { return base + amp * std::sin(M_PI * s); },
          [=](double s) { return amp * M_PI * std::cos(M_PI * s); }};
}

Fun1D cos_fun(double base, double amp) {
  return {[=](double s) { return base + amp * std::cos(M_PI * s); },
          [=](double s) { return -amp * M_PI * std::sin(M_PI * s); }};
}

// Gaussian factor amp * exp(-(s - center(t))^2 / width^2) * decay(t).
SpaceTimeFactor gaussian_factor(double amp, double width,
                                std::function<double(double)> center,
                                std::function<double(double)> dcenter,
                                std::function<double(double)> decay,
                                std::function<double(double)> ddecay) {
  const double w2 = width * width;
  auto base = [=](double s, double t) {
    const double d = s - center(t);
    return amp * std::exp(-d * d / w2);
  };
  SpaceTimeFactor f;
  f.v = [=](double s, double t) { return base(s, t) * decay(t); };
  f.ds = [=](double s, double t) {
    const double d = s - center(t);
    return base(s, t) * decay(t) * (-2.0 * d / w2);
  };
  f.d2s = [=](double s, double t) {
    const double d = s - center(t);
    return base(s, t) * decay(t) * (4.0 * d * d / (w2 * w2) - 2.0 / w2);
  };
  f.dt = [=](double s, double t) {
    const double d = s - center(t);
    return base(s, t) *
           (decay(t) * (2.0 * d / w2) * dcenter(t) + ddecay(t));
  };
  return f;
}

std::function<double(double)> zero_fn() { return [](double) { return 0.0; }; }
std::function<double(double)> one_fn() { return [](double) { return 1.0; }; }

SpaceTimeFactor fixed_gaussian(double amp, double width, double center,
                               bool time_decay) {
  auto c = [center](double) { return center; };
  auto decay = time_decay
                   ? std::function<double(double)>([](double t) { return std::exp(-t); })
                   : one_fn();
  auto ddecay = time_decay
                    ? std::function<double(double)>([](double t) { return -std::exp(-t); })
                    : zero_fn();
  return gaussian_factor(amp, width, c, zero_fn(), decay, ddecay);
}

// Moving-center Gaussians of the comparison examples.
SeparableTerm moving_gaussian_solution() {
  SeparableTerm term;
  term.fx = gaussian_factor(
      1.0, 0.12, [](double t) { return 0.1 * std::sin(t); },
      [](double t) { return 0.1 * std::cos(t); },
      [](double t) { return std::exp(-t); },
      [](double t) { return -std::exp(-t); });
  term.gy = gaussian_factor(
      1.0, 0.12, [](double t) { return -0.1 * std::cos(t); },
      [](double t) { return 0.1 * std::sin(t); }, one_fn(), zero_fn());
  return term;
}

}  // namespace

ProblemSpec preset(const std::string& name) {
  ProblemSpec spec;
  spec.name = name;
  if (name == "ex51_parameter") {
    spec.coeffs = {sin_fun(1.0, 0.1),  sin_fun(0.15, 0.1), cos_fun(0.15, 0.1),
                   sin_fun(1.0, 0.1),  cos_fun(1.0, 0.1),  cos_fun(0.15, 0.1),
                   sin_fun(0.15, 0.1), cos_fun(1.0, 0.1)};
    SeparableTerm term;
    term.fx = fixed_gaussian(0.1, 0.15, 0.0, true);
    term.gy = fixed_gaussian(1.0, 0.15, 0.0, false);
    spec.exact = {term};
    spec.t_end = 0.1 * M_PI;
    spec.fd_order = 2;
    spec.grid_sizes = {63, 127, 255};
    spec.fine_grid_sizes = {511};
    spec.default_scheme = "midpoint";
    return spec;
  }
  if (name == "ex54_compare" || name == "ex54_ic") {
    spec.coeffs = {constant_fun(1.0), constant_fun(0.8), constant_fun(1.0),
                   constant_fun(1.0), constant_fun(1.0), constant_fun(1.0),
                   constant_fun(0.8), constant_fun(1.0)};
    if (name == "ex54_compare") {
      spec.exact = {moving_gaussian_solution()};
    } else {
      SeparableTerm ic;
      ic.fx = fixed_gaussian(1.0, 0.12, 0.0, false);
      ic.gy = fixed_gaussian(1.0, 0.12, -0.1, false);
      spec.initial = {ic};
      spec.zero_forcing = true;
    }
    spec.t_end = 0.1 * M_PI;
    spec.fd_order = 2;
    spec.grid_sizes = {255};
    spec.default_scheme = "midpoint";
    return spec;
  }
  if (name == "ex_highcontrast") {
    const double eta = 0.1;
    auto sin_y = [](double scale) {
      return Fun1D{[scale](double s) { return scale * (1.0 + 0.1 * std::sin(M_PI * s)); },
                   [scale](double s) { return scale * 0.1 * M_PI * std::cos(M_PI * s); }};
    };
    spec.coeffs = {constant_fun(1.0), constant_fun(1.0), constant_fun(1.0),
                   constant_fun(1.0), sin_y(1.0),        sin_y(1.0 / eta),
                   sin_y(1.0 / eta),  sin_y(1.0 / (eta * eta))};
    SeparableTerm term;
    auto poly = [](double s) { return (1.0 - s * s) * std::exp(s); };
    auto dpoly = [](double s) { return (1.0 - 2.0 * s - s * s) * std::exp(s); };
    auto d2poly = [](double s) { return (-1.0 - 4.0 * s - s * s) * std::exp(s); };
    term.fx.v = [=](double s, double t) { return (1.0 + std::sin(M_PI * t / 2.0)) * poly(s); };
    term.fx.ds = [=](double s, double t) { return (1.0 + std::sin(M_PI * t / 2.0)) * dpoly(s); };
    term.fx.d2s = [=](double s, double t) { return (1.0 + std::sin(M_PI * t / 2.0)) * d2poly(s); };
    term.fx.dt = [=](double s, double t) {
      return 0.5 * M_PI * std::cos(M_PI * t / 2.0) * poly(s);
    };
    term.gy.v = [=](double s, double) { return poly(s); };
    term.gy.ds = [=](double s, double) { return dpoly(s); };
    term.gy.d2s = [=](double s, double) { return d2poly(s); };
    term.gy.dt = [](double, double) { return 0.0; };
    spec.exact = {term};
    spec.t_end = 0.1 * M_PI;
    spec.fd_order = 2;
    spec.contrast_eta = eta;
    spec.grid_sizes = {63, 127, 255};
    spec.default_scheme = "midpoint";
    return spec;
  }
  if (name == "ex55_bdf" || name == "ex56_dirk") {
    spec.coeffs = {sin_fun(1.0, 0.15),  constant_fun(0.15), constant_fun(1.0),
                   constant_fun(1.0),   cos_fun(1.0, 0.1),  constant_fun(1.0),
                   constant_fun(0.15),  cos_fun(1.0, 0.1)};
    spec.exact = {moving_gaussian_solution()};
    spec.t_end = 0.4 * M_PI;
    spec.fd_order = 4;
    spec.grid_sizes = {15, 31, 63, 127};
    spec.default_scheme = (name == "ex55_bdf") ? "bdf4" : "dirk4";
    return spec;
  }
  throw std::invalid_argument("preset: unknown name " + name);
}

std::vector<std::string> preset_names() {
  return {"ex51_parameter", "ex54_compare", "ex54_ic",
          "ex_highcontrast", "ex55_bdf", "ex56_dirk"};
}

}  // namespace lrme
