#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrme/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::string preset;
  std::vector<std::string> sets;  // key=value overrides
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_file,
                  "experiment config file (key = value)");
  cmd->add_option("-p,--preset", args.preset, "preset name");
  cmd->add_option("-s,--set", args.sets,
                  "config override key=value (repeatable)");
  cmd->add_option("-o,--output", args.output_dir,
                  "output directory (under $LRME_OUTPUT_ROOT unless absolute)");
}

lrme::ExperimentConfig build_config(const CommonArgs& args) {
  lrme::ExperimentConfig cfg;
  if (!args.config_file.empty())
    cfg = lrme::parse_config_file(args.config_file);
  if (!args.preset.empty()) cfg.preset_name = args.preset;
  int line = 1;
  for (const std::string& kv : args.sets)
    lrme::apply_config_line(cfg, kv, "--set", line++);
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-rank GMRES experiments for multiterm matrix equations"};
  app.require_subcommand(1);

  CommonArgs run_args, conv_args, cmp_args;
  CLI::App* run = app.add_subcommand("run", "single integration, history CSV");
  add_common(run, run_args);
  CLI::App* conv =
      app.add_subcommand("convergence", "grid sweep, convergence table");
  add_common(conv, conv_args);
  CLI::App* cmp =
      app.add_subcommand("compare", "preconditioner comparison with plots");
  add_common(cmp, cmp_args);

  std::string dump_name, dump_out;
  CLI::App* dump =
      app.add_subcommand("dump-preset", "print a preset as an editable config");
  dump->add_option("name", dump_name, "preset name")->required();
  dump->add_option("-o,--output", dump_out, "write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return lrme::cmd_run(build_config(run_args));
    if (conv->parsed()) return lrme::cmd_convergence(build_config(conv_args));
    if (cmp->parsed()) return lrme::cmd_compare(build_config(cmp_args));
    if (dump->parsed()) {
      const std::string text = lrme::dump_preset_config(dump_name);
      if (dump_out.empty()) {
        std::fputs(text.c_str(), stdout);
      } else {
        std::FILE* f = std::fopen(dump_out.c_str(), "wb");
        if (!f) {
          std::fprintf(stderr, "error: cannot write %s\n", dump_out.c_str());
          return 1;
        }
        std::fputs(text.c_str(), f);
        std::fclose(f);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
