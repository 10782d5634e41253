#include "adac/commands.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "adac/verify.hpp"

namespace adac {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Per-stage RNG stream tags; stages never share a stream.
constexpr std::uint64_t kDataStream = 0x64617461;      // "data"
constexpr std::uint64_t kPretrainStream = 0x70726574;  // "pret"
constexpr std::uint64_t kEvalStream = 0x6576616c;      // "eval"
constexpr std::uint64_t kStatsStream = 0x73746174;     // "stat"
constexpr std::uint64_t kVerifyStream = 0x76657269;    // "veri"

fs::path stage_dir(const RunConfig& cfg, const std::string& run_id) {
  return fs::path(cfg.out) / run_id;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void save_quantized(nn::NetParams params, const std::string& path) {
  nn::quantize_params(params);
  nn::save_params(params, path);
}

nn::NetParams load_checkpoint(const std::string& path, const char* producer) {
  if (!fs::exists(path))
    throw std::runtime_error("missing checkpoint " + path + "; produce it with `adac " +
                             producer + "` using the same config and seed");
  return nn::load_params(path);
}

// Length thresholds scaled from the reference table's 175/225/300 against a
// 142-step shortest path: 1.25x, 1.6x, 2.1x.
void scaled_thresholds(const MazeSpec& maze, std::uint64_t& t1, std::uint64_t& t2,
                       std::uint64_t& t3) {
  int sp = shortest_path_steps(maze);
  t1 = static_cast<std::uint64_t>(std::ceil(1.25 * sp));
  t2 = static_cast<std::uint64_t>(std::ceil(1.60 * sp));
  t3 = static_cast<std::uint64_t>(std::ceil(2.10 * sp));
}

struct DatasetReport {
  std::uint64_t trajectory_count = 0;
  std::uint64_t transition_count = 0;
  LengthCategories categories;
  std::vector<double> route_shares;  // per corridor, left to right
  std::uint64_t unrouted = 0;
  std::uint64_t min_length = 0;
  double median_length = 0.0;
  int shortest_path = 0;
  bool all_successful = false;
};

DatasetReport dataset_report(const MazeSpec& maze, const OfflineDataset& data) {
  DatasetReport rep;
  rep.trajectory_count = data.trajectory_count();
  rep.transition_count = data.size();
  rep.shortest_path = shortest_path_steps(maze);
  std::uint64_t t1, t2, t3;
  scaled_thresholds(maze, t1, t2, t3);
  rep.categories = trajectory_stats(data, t1, t2, t3);
  rep.min_length = min_trajectory_length(data);
  rep.median_length = median_trajectory_length(data);

  rep.route_shares.assign(static_cast<std::size_t>(corridor_count(maze)), 0.0);
  rep.all_successful = data.trajectory_count() > 0;
  for (std::size_t i = 0; i < data.trajectory_count(); ++i) {
    std::uint64_t begin = data.boundaries[i];
    std::uint64_t len = data.trajectory_length(i);
    std::vector<Transition> slice(data.transitions.begin() + static_cast<long>(begin),
                                  data.transitions.begin() + static_cast<long>(begin + len));
    int route = classify_route(maze, slice);
    if (route >= 0 && route < static_cast<int>(rep.route_shares.size()))
      rep.route_shares[static_cast<std::size_t>(route)] += 1.0;
    else
      rep.unrouted += 1;
    const Transition& last = slice.back();
    rep.all_successful = rep.all_successful && last.done && last.reward == 1.0;
  }
  if (rep.trajectory_count > 0)
    for (double& s : rep.route_shares) s /= static_cast<double>(rep.trajectory_count);
  return rep;
}

void print_dataset_report(const DatasetReport& rep, std::ostream& log) {
  const LengthCategories& c = rep.categories;
  char buf[256];
  std::snprintf(buf, sizeof buf, "dataset: %llu trajectories, %llu transitions\n",
                (unsigned long long)rep.trajectory_count,
                (unsigned long long)rep.transition_count);
  log << buf;
  std::snprintf(buf, sizeof buf,
                "length thresholds (shortest path %d steps): t1=%llu t2=%llu t3=%llu\n",
                rep.shortest_path, (unsigned long long)c.t1, (unsigned long long)c.t2,
                (unsigned long long)c.t3);
  log << buf;
  std::snprintf(buf, sizeof buf,
                "  optimal %.1f%%  near-optimal %.1f%%  competitive %.1f%%  sub-optimal %.1f%%\n",
                100.0 * c.optimal, 100.0 * c.near_optimal, 100.0 * c.competitive,
                100.0 * c.sub_optimal);
  log << buf;
  log << "route shares:";
  for (std::size_t i = 0; i < rep.route_shares.size(); ++i) {
    std::snprintf(buf, sizeof buf, " corridor%zu=%.1f%%", i, 100.0 * rep.route_shares[i]);
    log << buf;
  }
  if (rep.unrouted > 0) log << " unrouted=" << rep.unrouted;
  log << "\n";
  std::snprintf(buf, sizeof buf,
                "trajectory lengths: min %llu, median %.1f; all reach the goal: %s\n",
                (unsigned long long)rep.min_length, rep.median_length,
                rep.all_successful ? "yes" : "NO");
  log << buf;
}

json report_json(const DatasetReport& rep) {
  json j;
  j["trajectories"] = rep.trajectory_count;
  j["transitions"] = rep.transition_count;
  j["shortest_path_steps"] = rep.shortest_path;
  j["thresholds"] = {{"t1", rep.categories.t1}, {"t2", rep.categories.t2},
                     {"t3", rep.categories.t3}};
  j["categories"] = {{"optimal", rep.categories.optimal},
                     {"near_optimal", rep.categories.near_optimal},
                     {"competitive", rep.categories.competitive},
                     {"sub_optimal", rep.categories.sub_optimal}};
  j["route_shares"] = rep.route_shares;
  j["unrouted"] = rep.unrouted;
  j["min_length"] = rep.min_length;
  j["median_length"] = rep.median_length;
  j["all_successful"] = rep.all_successful;
  return j;
}

json eval_json(const EvalResult& res) {
  json j;
  j["success_rate"] = res.success_rate;
  j["median_length"] = res.median_length;
  j["episodes"] = res.lengths.size();
  j["lengths"] = res.lengths;
  return j;
}

void warn_on_ratio(const AdvantageConfig& acfg, std::ostream& log) {
  if (acfg.ratio_warning())
    log << "warning: lambda_pos < lambda_neg inverts the recommended ~1.5x clip ratio\n";
}

}  // namespace

std::string dataset_path(const RunConfig& cfg) {
  return (stage_dir(cfg, data_run_id(cfg)) / "dataset.bin").string();
}
std::string behavior_checkpoint_path(const RunConfig& cfg) {
  return (stage_dir(cfg, pretrain_run_id(cfg)) / "behavior.adnn").string();
}
std::string value_checkpoint_path(const RunConfig& cfg) {
  return (stage_dir(cfg, pretrain_run_id(cfg)) / "value.adnn").string();
}
std::string transition_checkpoint_path(const RunConfig& cfg) {
  return (stage_dir(cfg, pretrain_run_id(cfg)) / "transition.adnn").string();
}
std::string actor_checkpoint_path(const RunConfig& cfg) {
  return (stage_dir(cfg, train_run_id(cfg)) / "actor.adnn").string();
}
std::string critic1_checkpoint_path(const RunConfig& cfg) {
  return (stage_dir(cfg, train_run_id(cfg)) / "critic_q1.adnn").string();
}
std::string critic2_checkpoint_path(const RunConfig& cfg) {
  return (stage_dir(cfg, train_run_id(cfg)) / "critic_q2.adnn").string();
}
std::string metrics_path(const RunConfig& cfg) {
  return (stage_dir(cfg, train_run_id(cfg)) / "metrics.csv").string();
}

OfflineDataset load_dataset_artifact(const RunConfig& cfg) {
  std::string path = dataset_path(cfg);
  if (!fs::exists(path))
    throw std::runtime_error("missing dataset artifact " + path +
                             "; produce it with `adac gen-data` using the same config and seed");
  return load_dataset(path);
}

PretrainResult load_pretrain_artifacts(const RunConfig& cfg) {
  PretrainResult pre;
  pre.behavior.noise_net = load_checkpoint(behavior_checkpoint_path(cfg), "pretrain");
  pre.behavior.schedule = make_vp_schedule(cfg.diffusion_steps);
  pre.behavior.embedding = timestep_embedding(cfg.diffusion_steps, cfg.embed_dim);
  pre.value.net = load_checkpoint(value_checkpoint_path(cfg), "pretrain");
  pre.value.tau = cfg.value_tau;
  pre.transition.net = load_checkpoint(transition_checkpoint_path(cfg), "pretrain");
  return pre;
}

TrainedPolicy load_policy_artifacts(const RunConfig& cfg) {
  TrainedPolicy pol;
  pol.actor.noise_net = load_checkpoint(actor_checkpoint_path(cfg), "train");
  pol.actor.target_noise_net = pol.actor.noise_net;
  pol.actor.schedule = make_vp_schedule(cfg.diffusion_steps);
  pol.actor.embedding = timestep_embedding(cfg.diffusion_steps, cfg.embed_dim);
  pol.critics.q1 = load_checkpoint(critic1_checkpoint_path(cfg), "train");
  pol.critics.q2 = load_checkpoint(critic2_checkpoint_path(cfg), "train");
  pol.critics.target_q1 = pol.critics.q1;
  pol.critics.target_q2 = pol.critics.q2;
  return pol;
}

int cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  MazeSpec maze = make_maze(cfg.layout);
  Rng rng(cfg.seed, kDataStream);
  std::vector<CollectedTrajectory> collected =
      collect_scripted_dataset(maze, cfg.collect_options(), rng);
  OfflineDataset data = to_dataset(collected);
  if (cfg.normalize) fit_normalization(data);

  fs::path dir = stage_dir(cfg, data_run_id(cfg));
  fs::create_directories(dir);
  save_dataset(data, (dir / "dataset.bin").string());
  if (cfg.export_ldjson) {
    std::ofstream out(dir / "transitions.ldjson", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " +
                                       (dir / "transitions.ldjson").string());
    export_transitions_ldjson(data, out);
  }

  DatasetReport rep = dataset_report(maze, data);
  print_dataset_report(rep, log);
  write_text_file(dir / "stats.json", report_json(rep).dump(2) + "\n");
  write_text_file(dir / "config.ini", config_text(cfg));
  log << "dataset written to " << (dir / "dataset.bin").string() << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  OfflineDataset data = load_dataset_artifact(cfg);
  fs::path dir = stage_dir(cfg, pretrain_run_id(cfg));
  fs::create_directories(dir);

  Rng rng(cfg.seed, kPretrainStream);
  std::ofstream curve(dir / "pretrain_log.csv", std::ios::binary);
  if (!curve) throw std::runtime_error("cannot open for writing: " +
                                       (dir / "pretrain_log.csv").string());
  PretrainResult pre = pretrain_all(data, cfg.pretrain_config(), rng, &curve);

  save_quantized(pre.behavior.noise_net, behavior_checkpoint_path(cfg));
  save_quantized(pre.value.net, value_checkpoint_path(cfg));
  save_quantized(pre.transition.net, transition_checkpoint_path(cfg));

  json j;
  j["behavior"] = {{"holdout_before", pre.behavior_loss0}, {"holdout_after", pre.behavior_loss}};
  j["value"] = {{"holdout_before", pre.value_loss0}, {"holdout_after", pre.value_loss}};
  std::vector<double> rmse(pre.transition_rmse.data(),
                           pre.transition_rmse.data() + pre.transition_rmse.size());
  j["transition"] = {{"holdout_before", pre.transition_loss0},
                     {"holdout_after", pre.transition_loss},
                     {"holdout_rmse", rmse}};
  write_text_file(dir / "report.json", j.dump(2) + "\n");
  write_text_file(dir / "config.ini", config_text(cfg));

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "holdout losses: behavior %.4g -> %.4g, value %.4g -> %.4g, "
                "transition %.4g -> %.4g\n",
                pre.behavior_loss0, pre.behavior_loss, pre.value_loss0, pre.value_loss,
                pre.transition_loss0, pre.transition_loss);
  log << buf;
  log << "checkpoints written to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  OfflineDataset data = load_dataset_artifact(cfg);
  PretrainResult pre = load_pretrain_artifacts(cfg);
  MazeSpec maze = make_maze(cfg.layout);
  AdvantageConfig acfg = cfg.advantage_config();
  warn_on_ratio(acfg, log);

  fs::path dir = stage_dir(cfg, train_run_id(cfg));
  fs::create_directories(dir);
  TrainerState st = make_trainer(data, pre, acfg, cfg.train_config(), maze.max_force);

  std::ofstream metrics(metrics_path(cfg), std::ios::binary);
  if (!metrics) throw std::runtime_error("cannot open for writing: " + metrics_path(cfg));
  EvalResult final_eval = run_training(st, maze, &metrics, &log);

  save_quantized(st.actor.noise_net, actor_checkpoint_path(cfg));
  save_quantized(st.critics.q1, critic1_checkpoint_path(cfg));
  save_quantized(st.critics.q2, critic2_checkpoint_path(cfg));
  write_text_file(dir / "final_eval.json", eval_json(final_eval).dump(2) + "\n");
  write_text_file(dir / "config.ini", config_text(cfg));

  char buf[160];
  std::snprintf(buf, sizeof buf, "final eval: success %.2f, median length %.1f\n",
                final_eval.success_rate, final_eval.median_length);
  log << buf;
  log << "run artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  OfflineDataset data = load_dataset_artifact(cfg);
  TrainedPolicy pol = load_policy_artifacts(cfg);
  MazeSpec maze = make_maze(cfg.layout);

  fs::path dir = stage_dir(cfg, eval_run_id(cfg));
  fs::create_directories(dir);
  const Normalization* norm = data.normalization ? &*data.normalization : nullptr;
  Rng rng(cfg.seed, kEvalStream);
  EvalResult res = evaluate(pol.actor, pol.critics, maze, norm, cfg.episodes,
                            cfg.train_config(), rng);

  write_text_file(dir / "eval.json", eval_json(res).dump(2) + "\n");
  if (cfg.export_trajectories) {
    std::ofstream out(dir / "trajectories.ldjson", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " +
                                       (dir / "trajectories.ldjson").string());
    write_trajectories_ldjson(res, out);
  }
  write_text_file(dir / "config.ini", config_text(cfg));

  char buf[160];
  std::snprintf(buf, sizeof buf, "eval: %d episodes, success %.2f, median length %.1f\n",
                cfg.episodes, res.success_rate, res.median_length);
  log << buf;
  log << "eval artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_stats_dataset(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  OfflineDataset data = load_dataset_artifact(cfg);
  MazeSpec maze = make_maze(cfg.layout);
  DatasetReport rep = dataset_report(maze, data);
  print_dataset_report(rep, log);
  fs::path dir = stage_dir(cfg, data_run_id(cfg));
  write_text_file(dir / "stats.json", report_json(rep).dump(2) + "\n");
  return 0;
}

int cmd_stats_advantage(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  OfflineDataset data = load_dataset_artifact(cfg);
  PretrainResult pre = load_pretrain_artifacts(cfg);
  AdvantageOracle oracle;
  oracle.value = pre.value;
  oracle.dynamics = pre.transition;
  oracle.behavior = pre.behavior;
  oracle.config = cfg.advantage_config();
  warn_on_ratio(oracle.config, log);

  Rng rng(cfg.seed, kStatsStream);
  AdvantageStats stats = advantage_stats(oracle, data, rng);

  fs::path dir = stage_dir(cfg, advantage_stats_run_id(cfg));
  fs::create_directories(dir);
  json j;
  j["kappa"] = oracle.config.kappa;
  j["sample_count"] = oracle.config.sample_count;
  j["transitions"] = stats.count;
  j["positive_fraction"] = stats.positive_fraction;
  j["mean_positive"] = stats.mean_positive;
  j["mean_negative"] = stats.mean_negative;
  write_text_file(dir / "advantage_stats.json", j.dump(2) + "\n");
  write_text_file(dir / "config.ini", config_text(cfg));

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "advantage over %llu dataset pairs (kappa=%.2f): positive %.1f%%, "
                "mean+ %.4g, mean- %.4g\n",
                (unsigned long long)stats.count, oracle.config.kappa,
                100.0 * stats.positive_fraction, stats.mean_positive, stats.mean_negative);
  log << buf;
  log << "stats written to " << dir.string() << "\n";
  return 0;
}

int cmd_verify(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  Rng rng(cfg.seed, kVerifyStream);
  Certificate cert = certify_propositions(cfg.trials, rng);
  log << cert.table();

  fs::path dir = stage_dir(cfg, verify_run_id(cfg));
  fs::create_directories(dir);
  write_text_file(dir / "certificate.json", cert.to_json() + "\n");
  for (const PropositionCheck& check : cert.checks)
    if (!check.passed() && !check.failing_mdp_json.empty())
      write_text_file(dir / ("failing-" + check.name + ".json"), check.failing_mdp_json + "\n");
  write_text_file(dir / "config.ini", config_text(cfg));

  log << "certificate written to " << (dir / "certificate.json").string() << "\n";
  return cert.all_passed() ? 0 : 1;
}

}  // namespace adac
