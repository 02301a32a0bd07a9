#ifndef LRME_EXPERIMENT_HPP
#define LRME_EXPERIMENT_HPP

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrme/reference.hpp"
#include "lrme/timestep.hpp"

namespace lrme {

// Tolerance knob of a config: explicit value, or h^power, or the scheme
// default, each optionally scaled.
struct ToleranceSpec {
  std::optional<double> value;
  std::optional<double> power;
  double scale = 1.0;

  bool set() const { return value || power || scale != 1.0; }
  double resolve(double h, double fallback) const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string preset_name;
  std::string scheme;                  // empty: the preset default
  std::vector<std::string> preconds{"bug"};
  std::vector<Index> grids;            // empty: the preset grid family
  bool fine = false;                   // append the preset's fine grids
  ToleranceSpec eps, eps2, delta;
  int restart_m = 3;
  int maxit = 30;
  int max_total = 90;
  std::uint64_t seed = 20250823;
  std::string output_dir;              // empty: derived from preset + command
  std::string dirk_guess = "previous_stage";
  bool bdf_seed_dirk = false;
  int es_max_rank = 0;  // 0: ES apply rounds by tolerance only

  void validate() const;
};

// Flat key = value text with optional [section] headers and # comments.
// Diagnostics carry "source:line:".
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& source_name);
ExperimentConfig parse_config_file(const std::filesystem::path& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& line,
                       const std::string& source_name, int line_no);

std::string dump_preset_config(const std::string& preset_name);

SchemeSpec scheme_from_name(const std::string& name);
PrecondChoice precond_from_name(const std::string& name);

// RunOptions with all tolerances resolved to explicit values for grid h.
RunOptions options_for(const ExperimentConfig& cfg,
                       const std::string& precond_name, double h,
                       int scheme_order);

struct GridRun {
  Index n = 0;
  double h = 0.0;
  StepHistory history;
};

GridRun run_single(const ExperimentConfig& cfg, const std::string& precond_name,
                   Index n);

std::vector<Index> resolved_grids(const ExperimentConfig& cfg);

struct ConvergenceRow {
  std::string precond;
  double h = 0.0;
  double error = 0.0;
  std::optional<double> order;  // empty on the coarsest grid
};

std::vector<ConvergenceRow> convergence_rows(const std::string& precond,
                                             const std::vector<GridRun>& runs);

// Scientific notation with 6 significant digits.
std::string format_sci(double x);

void write_history_csv(const std::filesystem::path& path,
                       const StepHistory& history);

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

void write_svg_lines(const std::filesystem::path& path,
                     const std::string& title, const std::string& y_label,
                     bool log_y, const std::vector<PlotSeries>& series);

// Output directory: $LRME_OUTPUT_ROOT (default "out") / cfg.output_dir
// (default "<preset>_<command>"). Created on demand.
std::filesystem::path output_directory(const ExperimentConfig& cfg,
                                       const std::string& command);

int cmd_run(const ExperimentConfig& cfg);
int cmd_convergence(const ExperimentConfig& cfg);
int cmd_compare(const ExperimentConfig& cfg);

}  // namespace lrme

#endif
