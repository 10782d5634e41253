// Acceptance gate: eight release criteria, one PASS/FAIL line each.
// Heavy criteria (training runs) write their artifacts under --work-dir so a
// rerun against unchanged code reuses nothing implicitly: every stage is
// re-executed and compared where determinism demands it.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <adac/advantage.hpp>
#include <adac/commands.hpp>
#include <adac/config.hpp>
#include <adac/dataset.hpp>
#include <adac/maze.hpp>
#include <adac/nn.hpp>
#include <adac/pretrain.hpp>
#include <adac/trainer.hpp>
#include <adac/verify.hpp>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace adac;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Budget {
  double seconds = 0.0;  // 0 = no budget pinned
};

int g_passed = 0;
int g_failed = 0;

void run_criterion(int id, const std::string& name, Budget budget,
                   const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool over_budget = budget.seconds > 0.0 && secs > budget.seconds;
  bool pass = out.pass && !over_budget;
  if (over_budget) out.detail += " [over budget " + std::to_string((int)budget.seconds) + "s]";
  std::printf("C%d %s %-24s (%.1fs) %s\n", id, pass ? "PASS" : "FAIL", name.c_str(), secs,
              out.detail.c_str());
  std::fflush(stdout);
  (pass ? g_passed : g_failed)++;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------- C1: proposition certificates ----------

Outcome c1_certificates(const fs::path& work, int trials) {
  Rng rng(0, 0x76657269);
  Certificate cert = certify_propositions(trials, rng);
  std::ofstream(work / "c1_certificate.json") << cert.to_json() << "\n";
  int failed = 0;
  std::string failed_names;
  for (const auto& c : cert.checks) {
    if (c.diagnostic || c.passed()) continue;
    ++failed;
    if (!failed_names.empty()) failed_names += ",";
    failed_names += c.name;
  }
  Outcome out;
  out.pass = cert.all_passed();
  if (out.pass)
    out.detail = fmt("%d MDPs, all checks clean", trials);
  else
    out.detail = fmt("%d MDPs, failing: %s (see c1_certificate.json)", trials,
                     failed_names.c_str());
  return out;
}

// ---------- C2: finite-difference gradient integrity ----------

// Worst relative error of analytic vs central-difference gradient over a few
// randomized mini-batches. loss_fn must be deterministic in the params.
double fd_rel_error(const nn::NetParams& params,
                    const std::function<double(const nn::NetParams&)>& loss_fn,
                    const VectorXd& analytic) {
  VectorXd fd = nn::finite_difference(params, loss_fn);
  double scale = std::max(1e-8, analytic.cwiseAbs().maxCoeff());
  return (fd - analytic).cwiseAbs().maxCoeff() / scale;
}

OfflineDataset random_dataset(int transitions, Rng& rng) {
  OfflineDataset d;
  d.obs_dim = 4;
  d.act_dim = 2;
  for (int i = 0; i < transitions; ++i) {
    Transition t;
    t.state = VectorXd::NullaryExpr(4, [&](int) { return rng.uniform(-1.0, 1.0); });
    t.action = VectorXd::NullaryExpr(2, [&](int) { return rng.uniform(-0.8, 0.8); });
    t.next_state = VectorXd::NullaryExpr(4, [&](int) { return rng.uniform(-1.0, 1.0); });
    t.reward = rng.uniform();
    t.done = rng.uniform() < 0.1;
    d.transitions.push_back(std::move(t));
  }
  d.boundaries.push_back(0);
  return d;
}

Outcome c2_gradients() {
  Rng rng(11);
  OfflineDataset data = random_dataset(512, rng);
  const double tol = 1e-4;
  double worst = 0.0;
  std::string worst_name = "none";
  auto track = [&](const char* name, double rel) {
    if (rel > worst) {
      worst = rel;
      worst_name = name;
    }
  };

  BehaviorModel behavior = make_behavior_model(4, 2, 16, 6, 4, rng);
  ValueModel value = make_value_model(4, 16, 0.9, rng);
  TransitionModel dynamics = make_transition_model(4, 2, 16, rng);
  CriticPair critics = make_critic_pair(4, 2, 16, rng);
  ActorModel actor = make_actor_model(4, 2, 16, 6, 4, rng);

  for (int rep = 0; rep < 3; ++rep) {
    Batch batch = sample_batch(data, 24, rng);
    std::uint64_t probe_seed = 1000 + rep;

    {  // Eq. 11: diffusion behavior-cloning loss
      Rng r(probe_seed);
      nn::LossEval g = bc_loss_grad(behavior, batch, r);
      auto f = [&](const nn::NetParams& p) {
        BehaviorModel m = behavior;
        m.noise_net = p;
        Rng rr(probe_seed);
        return bc_loss_grad(m, batch, rr).value;
      };
      track("bc", fd_rel_error(behavior.noise_net, f, g.grad));
    }
    {  // Eq. 12: expectile value loss
      nn::LossEval g = expectile_value_loss_grad(value, batch, 0.99);
      auto f = [&](const nn::NetParams& p) {
        ValueModel m = value;
        m.net = p;
        return expectile_value_loss_grad(m, batch, 0.99).value;
      };
      track("expectile", fd_rel_error(value.net, f, g.grad));
    }
    {  // Eq. 13: transition loss
      nn::LossEval g = transition_loss_grad(dynamics, batch);
      auto f = [&](const nn::NetParams& p) {
        TransitionModel m = dynamics;
        m.net = p;
        return transition_loss_grad(m, batch).value;
      };
      track("transition", fd_rel_error(dynamics.net, f, g.grad));
    }
    {  // Eq. 14: critic regression against fixed targets, each twin head
      VectorXd targets =
          VectorXd::NullaryExpr(batch.rows(), [&](int) { return rng.uniform(-1.0, 1.0); });
      for (nn::NetParams* head : {&critics.q1, &critics.q2}) {
        nn::LossEval g = critic_head_loss_grad(*head, batch, targets);
        auto f = [&](const nn::NetParams& p) {
          return critic_head_loss_grad(p, batch, targets).value;
        };
        track("critic", fd_rel_error(*head, f, g.grad));
      }
    }
    {  // Eq. 15: actor loss through the full reverse process, normalizer pinned
      TrainConfig tc;
      tc.alpha = 0.5;
      ActorLossInfo info;
      BehaviorModel actor_net = actor.online();
      {
        Rng r(probe_seed);
        actor_loss_grad(actor_net, batch, critics, tc, r, &info);
      }
      Rng r(probe_seed);
      nn::LossEval g =
          actor_loss_grad(actor_net, batch, critics, tc, r, nullptr, info.normalizer);
      auto f = [&](const nn::NetParams& p) {
        BehaviorModel m = actor_net;
        m.noise_net = p;
        Rng rr(probe_seed);
        return actor_loss_grad(m, batch, critics, tc, rr, nullptr, info.normalizer).value;
      };
      track("actor", fd_rel_error(actor_net.noise_net, f, g.grad));
    }
  }

  Outcome out;
  out.pass = worst <= tol;
  out.detail = fmt("worst rel err %.2e (%s), tolerance %.0e", worst, worst_name.c_str(), tol);
  return out;
}

// ---------- C3: diffusion multimodality ----------

Outcome c3_multimodality(int train_steps) {
  Rng rng(21);
  Eigen::Vector2d mode_a(0.5, 0.5), mode_b(-0.5, -0.5);
  OfflineDataset data;
  data.obs_dim = 2;
  data.act_dim = 2;
  for (int i = 0; i < 4000; ++i) {
    Transition t;
    t.state = VectorXd::NullaryExpr(2, [&](int) { return rng.uniform(-0.1, 0.1); });
    Eigen::Vector2d center = (i % 2 == 0) ? mode_a : mode_b;
    t.action = center + 0.03 * Eigen::Vector2d(rng.normal(), rng.normal());
    t.next_state = t.state;
    t.reward = 0.0;
    t.done = false;
    data.transitions.push_back(std::move(t));
  }
  data.boundaries.push_back(0);

  BehaviorModel model = make_behavior_model(2, 2, 64, 10, 8, rng);
  nn::OptimizerState opt = nn::make_optimizer(model.noise_net, 1e-3);
  for (int step = 0; step < train_steps; ++step) {
    Batch batch = sample_batch(data, 128, rng);
    nn::LossEval g = bc_loss_grad(model, batch, rng);
    nn::adamw_step(model.noise_net, g.grad, opt);
  }

  MatrixXd states = MatrixXd::Zero(1000, 2);
  MatrixXd samples = bc_sample(model, states, rng);
  int near_a = 0, near_b = 0;
  for (int i = 0; i < samples.rows(); ++i) {
    Eigen::Vector2d a = samples.row(i).transpose();
    if ((a - mode_a).norm() < 0.15) ++near_a;
    if ((a - mode_b).norm() < 0.15) ++near_b;
  }
  Outcome out;
  out.pass = near_a >= 200 && near_b >= 200;
  out.detail = fmt("1000 samples: %d near (0.5,0.5), %d near (-0.5,-0.5); need >= 200 each",
                   near_a, near_b);
  return out;
}

// ---------- C4: dataset reproduction ----------

struct DatasetFacts {
  double shares[3] = {0, 0, 0};
  double optimal = 0.0;
  bool all_successful = false;
  int min_length = 0;
};

DatasetFacts read_dataset_facts(const RunConfig& cfg) {
  fs::path run = fs::path(cfg.out) / data_run_id(cfg);
  auto j = nlohmann::json::parse(slurp(run / "stats.json"));
  DatasetFacts f;
  for (int i = 0; i < 3 && i < (int)j["route_shares"].size(); ++i)
    f.shares[i] = 100.0 * j["route_shares"][i].get<double>();
  f.optimal = j["categories"]["optimal"].get<double>();
  f.all_successful = j["all_successful"].get<bool>();
  f.min_length = j["min_length"].get<int>();
  return f;
}

Outcome c4_dataset(const RunConfig& cfg, std::ostream& log) {
  if (cmd_gen_data(cfg, log) != 0) return {false, "gen-data failed"};
  DatasetFacts f = read_dataset_facts(cfg);
  const double target[3] = {33.0, 22.0, 45.0};
  bool shares_ok = true;
  for (int i = 0; i < 3; ++i) shares_ok = shares_ok && std::abs(f.shares[i] - target[i]) <= 5.0;
  Outcome out;
  out.pass = shares_ok && f.optimal == 0.0 && f.all_successful;
  out.detail = fmt("routes %.1f/%.1f/%.1f vs (33,22,45)+-5, optimal %.1f%%, all goal: %s",
                   f.shares[0], f.shares[1], f.shares[2], 100.0 * f.optimal,
                   f.all_successful ? "yes" : "no");
  return out;
}

// ---------- C5 / C6 / C7: end-to-end runs ----------

struct TrainOutcome {
  double success_rate = 0.0;
  double median_length = 0.0;
};

TrainOutcome read_final_eval(const RunConfig& cfg) {
  fs::path run = fs::path(cfg.out) / train_run_id(cfg);
  auto j = nlohmann::json::parse(slurp(run / "final_eval.json"));
  return {j["success_rate"].get<double>(), j["median_length"].get<double>()};
}

Outcome c5_stitching(const RunConfig& cfg, int min_dataset_length, std::ostream& log) {
  if (cmd_pretrain(cfg, log) != 0) return {false, "pretrain failed"};
  if (cmd_train(cfg, log) != 0) return {false, "train failed"};
  TrainOutcome t = read_final_eval(cfg);
  Outcome out;
  out.pass = t.success_rate >= 0.9 && t.median_length < (double)min_dataset_length;
  out.detail = fmt("success %.2f (need >= 0.9), median len %.1f vs dataset min %d",
                   t.success_rate, t.median_length, min_dataset_length);
  return out;
}

struct AblationArm {
  RunConfig cfg;
  TrainOutcome result;
};

Outcome c6_ablation(const RunConfig& base, int arm_steps, std::vector<AblationArm>& arms,
                    std::ostream& log) {
  int wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    RunConfig on = base;
    on.seed = seed;
    on.total_steps = arm_steps;
    on.use_advantage = true;
    on.validate();
    RunConfig off = on;
    off.use_advantage = false;

    if (cmd_gen_data(on, log) != 0) return {false, "gen-data failed"};
    if (cmd_pretrain(on, log) != 0) return {false, "pretrain failed"};
    if (cmd_train(on, log) != 0) return {false, "train (advantage on) failed"};
    if (cmd_train(off, log) != 0) return {false, "train (advantage off) failed"};

    TrainOutcome ron = read_final_eval(on);
    TrainOutcome roff = read_final_eval(off);
    arms.push_back({on, ron});
    arms.push_back({off, roff});
    double ratio = roff.median_length > 0 ? ron.median_length / roff.median_length : 1e9;
    if (ratio <= 0.9) ++wins;
    if (!per_seed.empty()) per_seed += " ";
    per_seed += fmt("s%llu:%.0f/%.0f", (unsigned long long)seed, ron.median_length,
                    roff.median_length);
  }
  Outcome out;
  out.pass = wins >= 3;
  out.detail = fmt("median on/off per seed [%s], ratio <= 0.9 in %d/4 (need >= 3)",
                   per_seed.c_str(), wins);
  return out;
}

Outcome c7_determinism(const RunConfig& data_cfg, const RunConfig& train_cfg,
                       const std::vector<AblationArm>& arms, std::ostream& log) {
  int files = 0, mismatches = 0;
  std::string first_bad;
  auto compare = [&](const fs::path& path, const std::string& before) {
    ++files;
    if (slurp(path) != before) {
      ++mismatches;
      if (first_bad.empty()) first_bad = path.filename().string();
    }
  };

  // Criterion 4 artifacts: regenerate the dataset.
  fs::path data_dir = fs::path(data_cfg.out) / data_run_id(data_cfg);
  std::string dataset_before = slurp(data_dir / "dataset.bin");
  std::string stats_before = slurp(data_dir / "stats.json");
  if (cmd_gen_data(data_cfg, log) != 0) return {false, "gen-data rerun failed"};
  compare(data_dir / "dataset.bin", dataset_before);
  compare(data_dir / "stats.json", stats_before);

  // Criterion 5 and 6 artifacts: retrain and compare the metrics CSVs.
  std::vector<RunConfig> reruns;
  reruns.push_back(train_cfg);
  for (const auto& arm : arms) reruns.push_back(arm.cfg);
  for (const auto& cfg : reruns) {
    fs::path metrics = fs::path(cfg.out) / train_run_id(cfg) / "metrics.csv";
    std::string before = slurp(metrics);
    if (cmd_train(cfg, log) != 0) return {false, "train rerun failed"};
    compare(metrics, before);
  }

  Outcome out;
  out.pass = mismatches == 0;
  if (out.pass)
    out.detail = fmt("%d artifacts byte-identical across reruns", files);
  else
    out.detail = fmt("%d/%d artifacts differ (first: %s)", mismatches, files,
                     first_bad.c_str());
  return out;
}

// ---------- C8: advantage monotonicity in kappa ----------

Outcome c8_kappa_monotonicity(const RunConfig& cfg, int state_count) {
  OfflineDataset data = load_dataset_artifact(cfg);
  PretrainResult pre = load_pretrain_artifacts(cfg);
  AdvantageOracle oracle{pre.value, pre.transition, pre.behavior, cfg.advantage_config(), {}};

  Rng rng(cfg.seed, 0x6b617070);
  const double kappas[5] = {0.55, 0.65, 0.75, 0.85, 0.95};
  int positive[5] = {0, 0, 0, 0, 0};
  for (int n = 0; n < state_count; ++n) {
    std::uint64_t idx = rng.below(data.size());
    const Transition& tr = data.transitions[idx];
    MatrixXd snorm = normalize_states(data, tr.state.transpose());
    VectorXd state = snorm.row(0).transpose();

    // One shared candidate draw per state; each kappa reuses the same values,
    // so the exceedance count is a pure quantile sweep.
    Rng sub = rng.fork(idx);
    MatrixXd cand = bc_sample(oracle.behavior, snorm.replicate(cfg.sample_count, 1), sub);
    VectorXd values(cfg.sample_count);
    for (int j = 0; j < cfg.sample_count; ++j)
      values[j] = next_state_value(oracle, state, cand.row(j).transpose());
    double own = next_state_value(oracle, state, tr.action);
    for (int k = 0; k < 5; ++k)
      if (own - quantile(values, kappas[k]) > 0.0) ++positive[k];
  }

  bool monotone = true;
  std::string fractions;
  for (int k = 0; k < 5; ++k) {
    if (k > 0 && positive[k] > positive[k - 1]) monotone = false;
    if (!fractions.empty()) fractions += " ";
    fractions += fmt("%.3f", (double)positive[k] / state_count);
  }
  Outcome out;
  out.pass = monotone;
  out.detail = fmt("positive fraction over kappa {0.55..0.95}: %s (%d states)%s",
                   fractions.c_str(), state_count, monotone ? "" : " NOT monotone");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"release acceptance suite"};
  std::string work_dir = "acceptance_runs";
  bool quick = false;
  app.add_option("--work-dir", work_dir, "directory for run artifacts");
  app.add_flag("--quick", quick, "tiny smoke profile (wiring check only; criteria will fail)");
  CLI11_PARSE(app, argc, argv);

  fs::path work(work_dir);
  fs::create_directories(work);
  std::ofstream log_file(work / "acceptance.log");

  // The pipeline profile is the documented default configuration.
  RunConfig base;
  base.seed = 0;
  base.out = (work / "runs").string();
  int arm_steps = 30000;
  int c1_trials = 200, c3_steps = 4000, c8_states = 1000;
  if (quick) {
    base.trajectories = 24;
    base.behavior_steps = base.value_steps = base.transition_steps = 300;
    base.pretrain_hidden = 32;
    base.total_steps = 200;
    base.eval_interval = 100;
    base.eval_episodes = 2;
    base.final_eval_episodes = 4;
    base.episodes = 4;
    arm_steps = 100;
    c1_trials = 10;
    c3_steps = 200;
    c8_states = 50;
  }
  base.validate();

  run_criterion(1, "proposition-certificates", {120},
                [&] { return c1_certificates(work, c1_trials); });
  run_criterion(2, "gradient-integrity", {60}, [] { return c2_gradients(); });
  run_criterion(3, "diffusion-multimodality", {300}, [&] { return c3_multimodality(c3_steps); });

  DatasetFacts facts;
  run_criterion(4, "dataset-reproduction", {120}, [&] {
    Outcome out = c4_dataset(base, log_file);
    facts = read_dataset_facts(base);
    return out;
  });
  run_criterion(5, "end-to-end-stitching", {2700},
                [&] { return c5_stitching(base, facts.min_length, log_file); });

  std::vector<AblationArm> arms;
  run_criterion(6, "advantage-ablation", {10800},
                [&] { return c6_ablation(base, arm_steps, arms, log_file); });
  run_criterion(7, "determinism", {0},
                [&] { return c7_determinism(base, base, arms, log_file); });
  run_criterion(8, "kappa-monotonicity", {120}, [&] { return c8_kappa_monotonicity(base, c8_states); });

  std::printf("acceptance: %d/8 criteria passed\n", g_passed);
  return g_failed == 0 ? 0 : 1;
}
