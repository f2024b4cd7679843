#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "run_config.hpp"
#include "upgnn/errors.hpp"

namespace {

struct FlagOverrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<std::string> gnn;
  std::optional<std::string> policy;
  std::optional<std::size_t> folds;
  std::optional<double> frac_initial;
  std::optional<double> frac_target;
};

upgnn::cli::RunConfig build_config(const FlagOverrides& flags) {
  upgnn::cli::RunConfig cfg;
  if (flags.config) cfg = upgnn::cli::load_run_config(*flags.config);
  // Flags win over the file.
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out) cfg.out = *flags.out;
  if (flags.workers) {
    if (*flags.workers == 0) {
      throw upgnn::ConfigError("workers must be positive");
    }
    cfg.workers = *flags.workers;
  }
  if (flags.gnn) cfg.model.gnn = upgnn::parse_gnn_kind(*flags.gnn);
  if (flags.policy) cfg.active.policy = upgnn::parse_policy(*flags.policy);
  if (flags.folds) cfg.folds = *flags.folds;
  if (flags.frac_initial) cfg.active.initial_fraction = *flags.frac_initial;
  if (flags.frac_target) cfg.active.target_fraction = *flags.frac_target;
  upgnn::cli::finalize_seeds(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-headed GNN uplift modeling with batch active learning"};
  app.require_subcommand(1);
  app.fallthrough();

  FlagOverrides flags;
  app.add_option("--config", flags.config, "JSON run configuration");
  app.add_option("--seed", flags.seed, "top-level seed (overrides config)");
  app.add_option("--out", flags.out, "output directory");
  app.add_option("--workers", flags.workers, "parallel fold-by-seed workers");
  app.add_option("--gnn", flags.gnn, "gnn kind: sage | ngcf | lgc");
  app.add_option("--policy", flags.policy,
                 "selection policy: greedy | eg | random");
  app.add_option("--folds", flags.folds, "fold count for eval");
  app.add_option("--frac-initial", flags.frac_initial,
                 "seed-set fraction for active");
  app.add_option("--frac-target", flags.frac_target,
                 "final labeled fraction for active");

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic datasets");
  CLI::App* train = app.add_subcommand("train", "train one model");
  CLI::App* eval_cmd = app.add_subcommand("eval", "inverted k-fold experiment");
  CLI::App* active = app.add_subcommand("active", "active-learning run");
  for (CLI::App* sub : {synth, train, eval_cmd, active}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "upgnn: error: " << e.what() << "\n";
    return 1;
  }

  try {
    const upgnn::cli::RunConfig cfg = build_config(flags);
    if (synth->parsed()) return upgnn::cli::cmd_synth(cfg);
    if (train->parsed()) return upgnn::cli::cmd_train(cfg);
    if (eval_cmd->parsed()) return upgnn::cli::cmd_eval(cfg);
    if (active->parsed()) return upgnn::cli::cmd_active(cfg);
    std::cerr << "upgnn: error: no subcommand selected\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "upgnn: error: " << e.what() << "\n";
    return 1;
  }
}
