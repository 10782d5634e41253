#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "adac/commands.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("--config", opts.config_path,
                  "key=value config file; built-in defaults when omitted");
  opts.seed_opt = sub->add_option("--seed", opts.seed, "override run.seed");
  opts.out_opt = sub->add_option("--out", opts.out, "override run.out (output root)");
}

adac::RunConfig resolve(const CommonOpts& opts) {
  adac::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = adac::load_config(opts.config_path);
  if (opts.seed_opt->count() > 0) cfg.seed = opts.seed;
  if (opts.out_opt->count() > 0) cfg.out = opts.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Offline RL pipeline: scripted PointMaze data, diffusion/value/dynamics "
      "pretraining, advantage-modulated actor-critic training, and tabular "
      "proposition certificates. Run directories are content-hashed from the "
      "resolved config, so reruns with one seed are byte-identical."};
  app.require_subcommand(1);

  CommonOpts gen_opts, pre_opts, train_opts, eval_opts, stats_opts, verify_opts;
  bool ablate = false;
  std::string stats_kind;

  CLI::App* gen = app.add_subcommand("gen-data",
                                     "collect the scripted maze dataset and report its stats");
  add_common(gen, gen_opts);
  CLI::App* pre = app.add_subcommand("pretrain",
                                     "train the frozen behavior/value/dynamics models");
  add_common(pre, pre_opts);
  CLI::App* train = app.add_subcommand("train", "run advantage-modulated actor-critic training");
  add_common(train, train_opts);
  train->add_flag("--ablate-advantage", ablate,
                  "force the modulated advantage to zero (ablation arm)");
  CLI::App* eval = app.add_subcommand("eval", "roll out a trained policy and export trajectories");
  add_common(eval, eval_opts);
  CLI::App* stats = app.add_subcommand("stats", "dataset or advantage statistics");
  stats->add_option("kind", stats_kind, "dataset | advantage")
      ->required()
      ->check(CLI::IsMember({"dataset", "advantage"}));
  add_common(stats, stats_opts);
  CLI::App* verify = app.add_subcommand("verify",
                                        "certify the tabular propositions on random MDPs");
  add_common(verify, verify_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return adac::cmd_gen_data(resolve(gen_opts), std::cout);
    if (pre->parsed()) return adac::cmd_pretrain(resolve(pre_opts), std::cout);
    if (train->parsed()) {
      adac::RunConfig cfg = resolve(train_opts);
      if (ablate) cfg.use_advantage = false;
      return adac::cmd_train(cfg, std::cout);
    }
    if (eval->parsed()) return adac::cmd_eval(resolve(eval_opts), std::cout);
    if (stats->parsed()) {
      adac::RunConfig cfg = resolve(stats_opts);
      return stats_kind == "dataset" ? adac::cmd_stats_dataset(cfg, std::cout)
                                     : adac::cmd_stats_advantage(cfg, std::cout);
    }
    if (verify->parsed()) return adac::cmd_verify(resolve(verify_opts), std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
