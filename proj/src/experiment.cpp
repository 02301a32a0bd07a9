#include "lrme/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lrme {

namespace fs = std::filesystem;

double ToleranceSpec::resolve(double h, double fallback) const {
  double v = fallback;
  if (value)
    v = *value;
  else if (power)
    v = std::pow(h, *power);
  return v * scale;
}

void ExperimentConfig::validate() const {
  if (preset_name.empty()) throw ConfigError("config: missing preset");
  if (preconds.empty()) throw ConfigError("config: empty preconditioner list");
  for (const std::string& p : preconds) precond_from_name(p);
  if (restart_m < 1 || maxit < 1)
    throw ConfigError("config: restart and maxit must be >= 1");
  if (restart_m * maxit > max_total)
    throw ConfigError("config: restart * maxit exceeds max_total = " +
                      std::to_string(max_total));
  if (dirk_guess != "previous_stage" && dirk_guess != "current_state")
    throw ConfigError("config: dirk_guess must be previous_stage or current_state");
  preset(preset_name);  // throws on unknown names
  if (!scheme.empty()) scheme_from_name(scheme);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void fail_at(const std::string& source, int line,
                          const std::string& msg) {
  throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, const std::string& source, int line) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail_at(source, line, "expected a number, got '" + v + "'");
  }
}

long parse_int(const std::string& v, const std::string& source, int line) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail_at(source, line, "expected an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& source, int line) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail_at(source, line, "expected a boolean, got '" + v + "'");
}

}  // namespace

void apply_config_line(ExperimentConfig& cfg, const std::string& raw,
                       const std::string& source, int line) {
  const auto eq = raw.find('=');
  if (eq == std::string::npos) fail_at(source, line, "expected key = value");
  const std::string key = trim(raw.substr(0, eq));
  const std::string val = trim(raw.substr(eq + 1));
  if (key.empty()) fail_at(source, line, "empty key");

  if (key == "preset") cfg.preset_name = val;
  else if (key == "scheme") cfg.scheme = val;
  else if (key == "precond") {
    cfg.preconds = split_list(val);
    if (cfg.preconds.empty()) fail_at(source, line, "empty preconditioner list");
  } else if (key == "grids") {
    cfg.grids.clear();
    for (const std::string& g : split_list(val))
      cfg.grids.push_back(parse_int(g, source, line));
    if (cfg.grids.empty()) fail_at(source, line, "empty grid list");
  } else if (key == "fine") cfg.fine = parse_bool(val, source, line);
  else if (key == "eps") cfg.eps.value = parse_double(val, source, line);
  else if (key == "eps_power") cfg.eps.power = parse_double(val, source, line);
  else if (key == "eps_scale") cfg.eps.scale = parse_double(val, source, line);
  else if (key == "eps2") cfg.eps2.value = parse_double(val, source, line);
  else if (key == "eps2_power") cfg.eps2.power = parse_double(val, source, line);
  else if (key == "eps2_scale") cfg.eps2.scale = parse_double(val, source, line);
  else if (key == "delta") cfg.delta.value = parse_double(val, source, line);
  else if (key == "delta_power") cfg.delta.power = parse_double(val, source, line);
  else if (key == "delta_scale") cfg.delta.scale = parse_double(val, source, line);
  else if (key == "restart") cfg.restart_m = int(parse_int(val, source, line));
  else if (key == "maxit") cfg.maxit = int(parse_int(val, source, line));
  else if (key == "max_total") cfg.max_total = int(parse_int(val, source, line));
  else if (key == "seed") cfg.seed = std::uint64_t(parse_int(val, source, line));
  else if (key == "output_dir") cfg.output_dir = val;
  else if (key == "dirk_guess") cfg.dirk_guess = val;
  else if (key == "bdf_seed_dirk") cfg.bdf_seed_dirk = parse_bool(val, source, line);
  else if (key == "es_max_rank") cfg.es_max_rank = int(parse_int(val, source, line));
  else fail_at(source, line, "unknown key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& source) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail_at(source, line_no, "unterminated section header");
      continue;  // sections are organizational only
    }
    apply_config_line(cfg, line, source, line_no);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.filename().string());
}

std::string dump_preset_config(const std::string& preset_name) {
  const ProblemSpec spec = preset(preset_name);
  std::ostringstream out;
  out << "[problem]\n";
  out << "preset = " << spec.name << "\n";
  out << "scheme = " << spec.default_scheme << "\n";
  out << "grids = ";
  for (std::size_t i = 0; i < spec.grid_sizes.size(); ++i)
    out << (i ? "," : "") << spec.grid_sizes[i];
  out << "\n";
  out << "fine = false\n";
  out << "\n[solver]\n";
  out << "precond = bug\n";
  out << "restart = 3\n";
  out << "maxit = 30\n";
  out << "max_total = 90\n";
  out << "seed = 20250823\n";
  out << "dirk_guess = previous_stage\n";
  out << "bdf_seed_dirk = false\n";
  out << "es_max_rank = 0\n";
  out << "\n[tolerances]\n";
  out << "# defaults: eps = h^(order+1), eps2 = h^order, delta = eps\n";
  out << "eps_scale = 1\n";
  out << "eps2_scale = 1\n";
  out << "delta_scale = 1\n";
  return out.str();
}

SchemeSpec scheme_from_name(const std::string& name) {
  if (name == "midpoint") return SchemeSpec::midpoint();
  if (name == "bdf1") return SchemeSpec::bdf(1);
  if (name == "bdf2") return SchemeSpec::bdf(2);
  if (name == "bdf3") return SchemeSpec::bdf(3);
  if (name == "bdf4") return SchemeSpec::bdf(4);
  if (name == "dirk4") return SchemeSpec::dirk(DirkTableau::crouzeix4());
  if (name == "euler") return SchemeSpec::dirk(DirkTableau::backward_euler());
  throw ConfigError("unknown scheme '" + name + "'");
}

PrecondChoice precond_from_name(const std::string& name) {
  if (name == "none") return PrecondChoice::None;
  if (name == "bug") return PrecondChoice::Bug;
  if (name == "es") return PrecondChoice::Es;
  if (name == "hybrid") return PrecondChoice::Hybrid;
  throw ConfigError("unknown preconditioner '" + name + "'");
}

RunOptions options_for(const ExperimentConfig& cfg,
                       const std::string& precond_name, double h,
                       int scheme_order) {
  const TolerancePolicy base = tolerance_for(h, scheme_order);
  RunOptions opt;
  opt.precond = precond_from_name(precond_name);
  opt.restart_m = cfg.restart_m;
  opt.maxit = cfg.maxit;
  opt.seed = cfg.seed;
  opt.eps = cfg.eps.resolve(h, base.eps);
  opt.eps2 = cfg.eps2.resolve(h, base.eps2);
  // delta tracks eps unless pinned separately.
  opt.delta = cfg.delta.set() ? cfg.delta.resolve(h, base.delta) : *opt.eps;
  opt.dirk_guess = cfg.dirk_guess == "current_state"
                       ? DirkGuessPolicy::CurrentState
                       : DirkGuessPolicy::PreviousStage;
  opt.bdf_seed_dirk = cfg.bdf_seed_dirk;
  opt.es_max_rank = cfg.es_max_rank;
  return opt;
}

std::vector<Index> resolved_grids(const ExperimentConfig& cfg) {
  if (!cfg.grids.empty()) return cfg.grids;
  const ProblemSpec spec = preset(cfg.preset_name);
  std::vector<Index> grids = spec.grid_sizes;
  if (cfg.fine)
    grids.insert(grids.end(), spec.fine_grid_sizes.begin(),
                 spec.fine_grid_sizes.end());
  return grids;
}

GridRun run_single(const ExperimentConfig& cfg, const std::string& precond_name,
                   Index n) {
  const ProblemSpec spec = preset(cfg.preset_name);
  const std::string scheme_name =
      cfg.scheme.empty() ? spec.default_scheme : cfg.scheme;
  const SchemeSpec scheme = scheme_from_name(scheme_name);
  const Grid grid = Grid::square(n);
  const RunOptions opt = options_for(cfg, precond_name, grid.hx, scheme.order);
  GridRun out;
  out.n = n;
  out.h = grid.hx;
  out.history = run_integration(spec, grid, scheme, opt);
  return out;
}

std::vector<ConvergenceRow> convergence_rows(const std::string& precond,
                                             const std::vector<GridRun>& runs) {
  std::vector<ConvergenceRow> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    ConvergenceRow r;
    r.precond = precond;
    r.h = runs[i].h;
    r.error = runs[i].history.records.back().error;
    if (i > 0 && rows[i - 1].error > 0.0 && r.error > 0.0)
      r.order = std::log2(rows[i - 1].error / r.error) /
                std::log2(runs[i - 1].h / runs[i].h);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.5e", x);
  return buf;
}

void write_history_csv(const fs::path& path, const StepHistory& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,time,error,eta,solution_rank,max_krylov_rank,iterations\n";
  for (const StepRecord& r : history.records) {
    if (r.step == 0) continue;  // one row per completed step
    out << r.step << ',' << format_sci(r.time) << ',' << format_sci(r.error)
        << ',' << format_sci(r.eta) << ',' << r.solution_rank << ','
        << r.max_krylov_rank << ',' << r.iterations << '\n';
  }
}

void write_svg_lines(const fs::path& path, const std::string& title,
                     const std::string& y_label, bool log_y,
                     const std::vector<PlotSeries>& series) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  const double w = 640, hgt = 420, ml = 70, mr = 20, mt = 40, mb = 45;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto ty = [&](double y) { return log_y ? std::log10(std::max(y, 1e-300)) : y; };
  for (const PlotSeries& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double yv = s.y[i];
      if (!std::isfinite(yv) || (log_y && yv <= 0.0)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(yv));
      ymax = std::max(ymax, ty(yv));
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) {
    return hgt - mb - (ty(y) - ymin) / (ymax - ymin) * (hgt - mt - mb);
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << hgt << "\" viewBox=\"0 0 " << w << ' ' << hgt
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << hgt - mb << "\" x2=\"" << w - mr
      << "\" y2=\"" << hgt - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << hgt - mb << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xmin + k * (xmax - xmin) / 4.0;
    const double fy = ymin + k * (ymax - ymin) / 4.0;
    char lab[32];
    out << "<text x=\"" << px(fx) << "\" y=\"" << hgt - mb + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">";
    std::snprintf(lab, sizeof(lab), "%g", fx);
    out << lab << "</text>\n";
    std::snprintf(lab, sizeof(lab), log_y ? "1e%.1f" : "%g", fy);
    out << "<text x=\"" << ml - 6 << "\" y=\""
        << hgt - mb - k * (hgt - mt - mb) / 4.0 + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" << lab << "</text>\n";
  }
  out << "<text x=\"16\" y=\"" << (mt + hgt - mb) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 "
      << (mt + hgt - mb) / 2 << ")\">" << y_label << "</text>\n";
  out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << hgt - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">step</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kColors[si % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0.0)) continue;
      out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    out << "\"/>\n";
    const double lx = w - mr - 130, ly = mt + 16.0 * double(si);
    out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22
        << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << lx + 27 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
}

fs::path output_directory(const ExperimentConfig& cfg,
                          const std::string& command) {
  const char* root_env = std::getenv("LRME_OUTPUT_ROOT");
  const fs::path root = root_env ? fs::path(root_env) : fs::path("out");
  fs::path dir = cfg.output_dir.empty()
                     ? root / (cfg.preset_name + "_" + command)
                     : (fs::path(cfg.output_dir).is_absolute()
                            ? fs::path(cfg.output_dir)
                            : root / cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

int cmd_run(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Index> grids = resolved_grids(cfg);
  if (grids.empty()) throw ConfigError("config: empty grid list");
  const fs::path dir = output_directory(cfg, "run");
  const GridRun run = run_single(cfg, cfg.preconds.front(), grids.front());
  write_history_csv(dir / "history.csv", run.history);
  std::printf("wrote %s (n=%lld, final error %s)\n",
              (dir / "history.csv").c_str(), (long long)run.n,
              format_sci(run.history.records.back().error).c_str());
  return 0;
}

int cmd_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Index> grids = resolved_grids(cfg);
  if (grids.size() < 2)
    throw ConfigError("config: convergence needs at least 2 grids");
  const fs::path dir = output_directory(cfg, "convergence");

  std::vector<ConvergenceRow> all;
  for (const std::string& pc : cfg.preconds) {
    std::vector<GridRun> runs;
    for (Index n : grids) {
      runs.push_back(run_single(cfg, pc, n));
      write_history_csv(
          dir / ("history_" + pc + "_n" + std::to_string(runs.back().n) + ".csv"),
          runs.back().history);
    }
    const auto rows = convergence_rows(pc, runs);
    all.insert(all.end(), rows.begin(), rows.end());
  }

  std::ofstream csv(dir / "table.csv", std::ios::binary);
  csv << "precond,h,error,order\n";
  for (const ConvergenceRow& r : all)
    csv << r.precond << ',' << format_sci(r.h) << ',' << format_sci(r.error)
        << ',' << (r.order ? format_sci(*r.order) : std::string()) << '\n';

  std::ofstream md(dir / "table.md", std::ios::binary);
  md << "| precond | h | error | order |\n|---|---|---|---|\n";
  for (const ConvergenceRow& r : all)
    md << "| " << r.precond << " | " << format_sci(r.h) << " | "
       << format_sci(r.error) << " | " << (r.order ? format_sci(*r.order) : "-")
       << " |\n";

  std::printf("wrote %s\n", (dir / "table.csv").c_str());
  return 0;
}

int cmd_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Index> grids = resolved_grids(cfg);
  if (grids.empty()) throw ConfigError("config: empty grid list");
  const Index n = grids.front();
  const fs::path dir = output_directory(cfg, "compare");

  std::vector<GridRun> runs;
  for (const std::string& pc : cfg.preconds) {
    runs.push_back(run_single(cfg, pc, n));
    write_history_csv(dir / ("history_" + pc + ".csv"), runs.back().history);
  }

  const auto collect = [&](auto&& get) {
    std::vector<PlotSeries> out;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      PlotSeries s;
      s.label = cfg.preconds[i];
      for (const StepRecord& r : runs[i].history.records) {
        if (r.step == 0) continue;
        s.x.push_back(r.step);
        s.y.push_back(get(r));
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  write_svg_lines(dir / "error.svg", cfg.preset_name + ": solution error",
                  "error", true,
                  collect([](const StepRecord& r) { return r.error; }));
  write_svg_lines(dir / "eta.svg", cfg.preset_name + ": backward error",
                  "eta", true,
                  collect([](const StepRecord& r) { return r.eta; }));
  write_svg_lines(dir / "ranks.svg", cfg.preset_name + ": ranks", "rank",
                  false, [&] {
                    auto sol = collect([](const StepRecord& r) {
                      return double(r.solution_rank);
                    });
                    auto kry = collect([](const StepRecord& r) {
                      return double(r.max_krylov_rank);
                    });
                    for (std::size_t i = 0; i < sol.size(); ++i)
                      sol[i].label += " sol";
                    for (auto& s : kry) {
                      s.label += " krylov";
                      sol.push_back(std::move(s));
                    }
                    return sol;
                  }());
  write_svg_lines(dir / "iterations.svg", cfg.preset_name + ": iterations",
                  "iterations", false,
                  collect([](const StepRecord& r) { return double(r.iterations); }));
  std::printf("wrote %s\n", dir.c_str());
  return 0;
}

}  // namespace lrme
