#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "ecurve/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ecurve: longitudinal effect-curve estimation under modified treatment policies"};
  app.require_subcommand(1);

  std::string config_path, output_override;
  long long seed_override = -1;
  int threads_override = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--seed", seed_override, "override the config seed");
    cmd->add_option("--threads", threads_override, "override the thread count");
    cmd->add_option("--output", output_override, "override the output directory");
  };

  CLI::App* estimate = app.add_subcommand("estimate", "fit effect curves on a CSV dataset");
  add_common(estimate);
  CLI::App* simulate = app.add_subcommand("simulate", "run a simulation study");
  add_common(simulate);
  CLI::App* convert = app.add_subcommand("convert", "dump the long-format dataset for inspection");
  add_common(convert);

  CLI::App* contrast = app.add_subcommand("contrast", "effect curve between two estimate runs");
  std::string dir_a, dir_b, estimator = "sdr", contrast_out = "contrast_out";
  double alpha = 0.05;
  int draws = 1000;
  long long contrast_seed = 1;
  contrast->add_option("--a", dir_a, "first run directory")->required();
  contrast->add_option("--b", dir_b, "second run directory")->required();
  contrast->add_option("--estimator", estimator, "estimator name inside the runs");
  contrast->add_option("--alpha", alpha, "confidence level");
  contrast->add_option("--draws", draws, "multiplier bootstrap draws");
  contrast->add_option("--seed", contrast_seed, "bootstrap seed");
  contrast->add_option("--output", contrast_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (contrast->parsed()) {
      ecurve::run_contrast(dir_a, dir_b, estimator, alpha, draws,
                           static_cast<std::uint64_t>(contrast_seed), contrast_out);
      return 0;
    }
    ecurve::RunConfig cfg = ecurve::load_config(config_path);
    if (seed_override >= 0) {
      cfg.seed = static_cast<std::uint64_t>(seed_override);
      cfg.study.seed = cfg.seed;
    }
    if (threads_override >= 0) {
      cfg.threads = threads_override;
      cfg.study.threads = cfg.threads;
    }
    if (!output_override.empty()) cfg.output = output_override;
    if (estimate->parsed()) {
      ecurve::run_estimate(cfg);
    } else if (simulate->parsed()) {
      ecurve::run_simulate(cfg);
    } else if (convert->parsed()) {
      ecurve::run_convert(cfg);
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
