#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "earlyvision/cli.hpp"

using namespace earlyvision;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
  std::string cell;
  bool dry_run = false;
  bool plots = false;
};

void add_common(CLI::App* sub, Common& c, bool with_plots) {
  sub->add_option("--config", c.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Global seed");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--mode", c.mode, "Front end")->check(CLI::IsMember({"subcortical", "bypass", "cascade"}));
  sub->add_option("--cell", c.cell, "Pathway")->check(CLI::IsMember({"P", "M"}));
  sub->add_flag("--dry-run", c.dry_run, "Validate the configuration and write nothing");
  if (with_plots) sub->add_flag("--plots", c.plots, "Also write SVG plots of the CSVs");
}

RunConfig build_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (const char* env = std::getenv(kOutDirEnv); env && *env) cfg.out_dir = env;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.seed) cfg.seed = *c.seed;
  if (!c.mode.empty()) cfg.mode = front_end_mode_from_string(c.mode);
  if (!c.cell.empty()) cfg.cell = cell_class_from_string(c.cell);
  cfg.bank.grid = cfg.grid;
  return cfg;
}

void report(const CommandResult& r, bool dry_run) {
  if (dry_run) {
    std::cout << "configuration ok (dry run, nothing written)\n";
    return;
  }
  for (const auto& p : r.written) std::cout << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-vision front end: subcortical and V1 stages, in-silico neurophysiology and tuning"};
  app.require_subcommand(1);

  Common tune_opts, measure_opts, forward_opts;
  auto* tune_cmd = app.add_subcommand("tune", "Bayesian optimization of one pathway against target properties");
  add_common(tune_cmd, tune_opts, true);
  auto* measure_cmd = app.add_subcommand("measure", "Run the SF, size and contrast experiments on one cell");
  add_common(measure_cmd, measure_opts, true);
  auto* forward_cmd = app.add_subcommand("forward", "Run a PNG through the front end and dump activations");
  add_common(forward_cmd, forward_opts, false);
  std::string image;
  forward_cmd->add_option("image", image, "Input PNG (overrides the config)")->check(CLI::ExistingFile);

  auto* validate_cmd = app.add_subcommand("validate", "Check a parameter file");
  std::string param_file, space_arg;
  validate_cmd->add_option("file", param_file, "Parameter file")->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--space", space_arg,
                           "Search space to check against: 'default' for the file's pathway box, or a JSON file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*tune_cmd) {
      const RunConfig cfg = build_config(tune_opts);
      const auto r = cmd_tune(cfg, tune_opts.dry_run, tune_opts.plots, &std::cerr);
      report(r, tune_opts.dry_run);
      return r.exit_code;
    }
    if (*measure_cmd) {
      const RunConfig cfg = build_config(measure_opts);
      const auto r = cmd_measure(cfg, measure_opts.dry_run, measure_opts.plots, &std::cerr);
      report(r, measure_opts.dry_run);
      return r.exit_code;
    }
    if (*forward_cmd) {
      RunConfig cfg = build_config(forward_opts);
      if (!image.empty()) cfg.image = image;
      const auto r = cmd_forward(cfg, forward_opts.dry_run, &std::cerr);
      report(r, forward_opts.dry_run);
      return r.exit_code;
    }
    if (*validate_cmd) {
      std::optional<SearchSpace> space;
      if (space_arg == "default") {
        try {
          space = SearchSpace::subcortical(load_params(param_file).cell_class);
        } catch (const std::exception&) {
        }
      } else if (!space_arg.empty()) {
        space = search_space_from_json(read_json(space_arg));
      }
      return cmd_validate(param_file, space, std::cout).exit_code;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
