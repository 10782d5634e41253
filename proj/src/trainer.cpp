#include "adac/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace adac {

using nn::Graph;
using nn::LossEval;
using nn::NetParams;
using nn::NetSpec;

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma outside (0,1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (backup_count < 1) throw std::invalid_argument("backup_count must be >= 1");
  if (eval_candidates < 1) throw std::invalid_argument("eval_candidates must be >= 1");
  if (!(eval_softmax_temperature > 0.0))
    throw std::invalid_argument("eval_softmax_temperature must be positive");
  if (!(critic_lr > 0.0) || !(actor_lr > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  if (!(target_rate > 0.0 && target_rate <= 1.0))
    throw std::invalid_argument("target_rate outside (0,1]");
  if (batch_size < 1 || total_steps < 1 || eval_interval < 1)
    throw std::invalid_argument("batch_size, total_steps, eval_interval must be >= 1");
  if (eval_episodes < 0 || final_eval_episodes < 0)
    throw std::invalid_argument("evaluation episode counts must be >= 0");
  if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
}

CriticPair make_critic_pair(int obs_dim, int act_dim, int hidden, Rng& rng) {
  NetSpec spec;
  spec.layer_widths = {obs_dim + act_dim, hidden, hidden, hidden, 1};
  CriticPair c;
  c.q1 = nn::init_params(spec, rng, /*final_layer_scale=*/0.01);
  c.q2 = nn::init_params(spec, rng, /*final_layer_scale=*/0.01);
  c.target_q1 = c.q1;
  c.target_q2 = c.q2;
  return c;
}

VectorXd min_twin_q(const NetParams& head1, const NetParams& head2, const MatrixXd& states,
                    const MatrixXd& actions) {
  if (states.rows() != actions.rows())
    throw std::invalid_argument("min_twin_q: row mismatch");
  MatrixXd sa(states.rows(), states.cols() + actions.cols());
  sa << states, actions;
  VectorXd q1 = nn::forward(head1, sa).col(0);
  VectorXd q2 = nn::forward(head2, sa).col(0);
  return q1.cwiseMin(q2);
}

BehaviorModel ActorModel::online() const { return BehaviorModel{noise_net, schedule, embedding}; }

BehaviorModel ActorModel::target() const {
  return BehaviorModel{target_noise_net, schedule, embedding};
}

ActorModel make_actor_model(int obs_dim, int act_dim, int hidden, int diffusion_steps,
                            int embed_dim, Rng& rng) {
  BehaviorModel base = make_behavior_model(obs_dim, act_dim, hidden, diffusion_steps,
                                           embed_dim, rng);
  ActorModel a;
  a.noise_net = base.noise_net;
  a.target_noise_net = base.noise_net;
  a.schedule = std::move(base.schedule);
  a.embedding = std::move(base.embedding);
  return a;
}

namespace {

// Shared by every target assembly site so equality checks between them are
// not at the mercy of per-expression fp contraction.
double td_target(double reward, double gamma, double done, double bootstrap) {
  return reward + gamma * (1.0 - done) * bootstrap;
}

std::uint64_t row_tag(const Batch& batch, int row) {
  return row < static_cast<int>(batch.indices.size()) ? batch.indices[row]
                                                      : static_cast<std::uint64_t>(row);
}

}  // namespace

BackupInfo critic_backup(const Batch& batch, const ActorModel& actor,
                         const CriticPair& critics, const AdvantageOracle& oracle,
                         const TrainConfig& config, Rng& rng) {
  const int rows = batch.rows();
  const int n = config.candidates();
  BackupInfo out;
  out.targets.resize(rows);
  if (rows == 0) return out;

  BehaviorModel tgt = actor.target();
  MatrixXd stacked = batch.next_states.replicate(n, 1);
  MatrixXd cand = bc_sample(tgt, stacked, rng);
  VectorXd q = min_twin_q(critics.target_q1, critics.target_q2, stacked, cand);

  if (config.use_advantage) {
    MatrixXd inputs(stacked.rows(), stacked.cols() + cand.cols());
    inputs << stacked, cand;
    MatrixXd predicted = nn::forward(oracle.dynamics.net, inputs);
    VectorXd value = nn::forward(oracle.value.net, predicted).col(0);
    VectorXd th(rows);
    for (int r = 0; r < rows; ++r) {
      if (oracle.threshold_cache.has_value()) {
        th[r] = cached_threshold(oracle, row_tag(batch, r));
      } else {
        Rng sub = rng.fork(row_tag(batch, r));
        th[r] = threshold(oracle, batch.next_states.row(r).transpose(), sub);
      }
    }
    double sum = 0.0, positive = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int r = 0; r < rows; ++r) {
        double mod = softclip(value[j * rows + r] - th[r], oracle.config.lambda_pos,
                              oracle.config.lambda_neg);
        q[j * rows + r] += mod;
        sum += mod;
        if (mod > 0.0) positive += 1.0;
      }
    }
    out.mean_modulated_adv = sum / static_cast<double>(n * rows);
    out.positive_fraction = positive / static_cast<double>(n * rows);
  }

  for (int r = 0; r < rows; ++r) {
    double best = q[r];
    for (int j = 1; j < n; ++j) best = std::max(best, q[j * rows + r]);
    out.targets[r] = td_target(batch.rewards[r], config.gamma, batch.dones[r], best);
  }
  return out;
}

VectorXd critic_target(const Batch& batch, const ActorModel& actor, const CriticPair& critics,
                       const AdvantageOracle& oracle, const TrainConfig& config, Rng& rng) {
  return critic_backup(batch, actor, critics, oracle, config, rng).targets;
}

VectorXd standard_bellman_target(const Batch& batch, const ActorModel& actor,
                                 const CriticPair& critics, const TrainConfig& config,
                                 Rng& rng) {
  BehaviorModel tgt = actor.target();
  MatrixXd cand = bc_sample(tgt, batch.next_states, rng);
  VectorXd q = min_twin_q(critics.target_q1, critics.target_q2, batch.next_states, cand);
  VectorXd t(batch.rows());
  for (int r = 0; r < batch.rows(); ++r)
    t[r] = td_target(batch.rewards[r], config.gamma, batch.dones[r], q[r]);
  return t;
}

double critic_loss(const Batch& batch, const CriticPair& critics, const VectorXd& targets) {
  if (targets.size() != batch.rows())
    throw std::invalid_argument("critic_loss: target size mismatch");
  MatrixXd sa(batch.rows(), batch.states.cols() + batch.actions.cols());
  sa << batch.states, batch.actions;
  double l1 = (nn::forward(critics.q1, sa).col(0) - targets).squaredNorm() / batch.rows();
  double l2 = (nn::forward(critics.q2, sa).col(0) - targets).squaredNorm() / batch.rows();
  return 0.5 * (l1 + l2);
}

LossEval critic_head_loss_grad(const NetParams& head, const Batch& batch,
                               const VectorXd& targets) {
  if (targets.size() != batch.rows())
    throw std::invalid_argument("critic_head_loss_grad: target size mismatch");
  MatrixXd sa(batch.rows(), batch.states.cols() + batch.actions.cols());
  sa << batch.states, batch.actions;
  return nn::eval_loss(head, [&](Graph& g) {
    auto q = g.apply_net(head, g.constant(std::move(sa)));
    g.add_mean_sq(q, targets);
  });
}

LossEval actor_loss_grad(const BehaviorModel& actor_net, const Batch& batch,
                         const CriticPair& critics, const TrainConfig& config, Rng& rng,
                         ActorLossInfo* info, double normalizer_override) {
  ActorLossInfo local;
  LossEval ev = nn::eval_loss(actor_net.noise_net, [&](Graph& g) {
    add_bc_term(g, actor_net, batch, rng);
    local.bc = g.loss();
    if (config.alpha > 0.0) {
      auto sampled = bc_sample_node(g, actor_net, batch.states, rng);
      auto sa = g.concat_cols(g.constant(batch.states), sampled);
      auto qmin = g.min2(g.apply_net(critics.q1, sa), g.apply_net(critics.q2, sa));
      const MatrixXd& qv = g.value(qmin);
      if (!qv.allFinite())
        throw std::runtime_error(
            "actor guidance produced a non-finite Q value; critic has diverged");
      local.mean_q = qv.mean();
      double norm = normalizer_override >= 0.0 ? normalizer_override : qv.cwiseAbs().mean();
      local.normalizer = std::max(norm, 1e-8);
      g.add_mean(qmin, -config.alpha / local.normalizer);
    }
  });
  if (info) *info = local;
  return ev;
}

TrainerState make_trainer(const OfflineDataset& dataset, const PretrainResult& pretrained,
                          const AdvantageConfig& adv_config, const TrainConfig& config,
                          double action_scale) {
  config.validate();
  adv_config.validate();
  if (!(action_scale > 0.0)) throw std::invalid_argument("action_scale must be positive");
  if (dataset.size() == 0) throw std::invalid_argument("training needs a non-empty dataset");

  TrainerState st;
  st.config = config;
  st.dataset = &dataset;
  st.action_scale = action_scale;
  st.rng = Rng(config.seed);
  st.actor = make_actor_model(dataset.obs_dim, dataset.act_dim, config.hidden,
                              pretrained.behavior.schedule.step_count,
                              static_cast<int>(pretrained.behavior.embedding.cols()), st.rng);
  st.critics = make_critic_pair(dataset.obs_dim, dataset.act_dim, config.hidden, st.rng);
  st.oracle.value = pretrained.value;
  st.oracle.dynamics = pretrained.transition;
  st.oracle.behavior = pretrained.behavior;
  st.oracle.config = adv_config;
  if (config.use_advantage) {
    Rng cache_rng = st.rng.fork(0x41445641);  // stable tag, base stream untouched
    precompute_thresholds(st.oracle, dataset, cache_rng);
  }
  st.q1_opt = nn::make_optimizer(st.critics.q1, config.critic_lr);
  st.q2_opt = nn::make_optimizer(st.critics.q2, config.critic_lr);
  st.actor_opt = nn::make_optimizer(st.actor.noise_net, config.actor_lr);
  return st;
}

StepMetrics train_step(TrainerState& st) {
  const TrainConfig& cfg = st.config;
  Batch batch = sample_batch(*st.dataset, cfg.batch_size, st.rng);
  batch.states = normalize_states(*st.dataset, std::move(batch.states));
  batch.next_states = normalize_states(*st.dataset, std::move(batch.next_states));
  if (st.action_scale != 1.0) batch.actions /= st.action_scale;

  BackupInfo backup = critic_backup(batch, st.actor, st.critics, st.oracle, cfg, st.rng);

  MatrixXd sa(batch.rows(), batch.states.cols() + batch.actions.cols());
  sa << batch.states, batch.actions;
  MatrixXd q1_vals, q2_vals;
  LossEval c1 = nn::eval_loss(st.critics.q1, [&](Graph& g) {
    auto q = g.apply_net(st.critics.q1, g.constant(sa));
    q1_vals = g.value(q);
    g.add_mean_sq(q, backup.targets);
  });
  LossEval c2 = nn::eval_loss(st.critics.q2, [&](Graph& g) {
    auto q = g.apply_net(st.critics.q2, g.constant(sa));
    q2_vals = g.value(q);
    g.add_mean_sq(q, backup.targets);
  });
  nn::adamw_step(st.critics.q1, c1.grad, st.q1_opt);
  nn::adamw_step(st.critics.q2, c2.grad, st.q2_opt);

  BehaviorModel actor_net = st.actor.online();
  ActorLossInfo actor_info;
  LossEval a = actor_loss_grad(actor_net, batch, st.critics, cfg, st.rng, &actor_info);
  nn::adamw_step(st.actor.noise_net, a.grad, st.actor_opt);

  nn::soft_update(st.critics.target_q1, st.critics.q1, cfg.target_rate);
  nn::soft_update(st.critics.target_q2, st.critics.q2, cfg.target_rate);
  nn::soft_update(st.actor.target_noise_net, st.actor.noise_net, cfg.target_rate);
  st.step += 1;

  StepMetrics m;
  m.critic_loss = 0.5 * (c1.value + c2.value);
  m.actor_loss = a.value;
  m.mean_q = q1_vals.col(0).cwiseMin(q2_vals.col(0)).mean();
  m.mean_adv = backup.mean_modulated_adv;
  m.pos_adv_frac = backup.positive_fraction;
  return m;
}

VectorXd select_action(const BehaviorModel& actor_net, const CriticPair& critics,
                       const VectorXd& state, const TrainConfig& config, Rng& rng) {
  const int k = config.eval_candidates;
  MatrixXd states = state.transpose().replicate(k, 1);
  MatrixXd cand = bc_sample(actor_net, states, rng);
  VectorXd q = min_twin_q(critics.q1, critics.q2, states, cand);
  double top = q.maxCoeff();
  VectorXd w = ((q.array() - top) / config.eval_softmax_temperature).exp();
  double u = rng.uniform() * w.sum();
  int pick = k - 1;
  double acc = 0.0;
  for (int i = 0; i < k; ++i) {
    acc += w[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  return cand.row(pick).transpose();
}

EvalResult evaluate(const ActorModel& actor, const CriticPair& critics, const MazeSpec& maze,
                    const Normalization* norm, int episode_count, const TrainConfig& config,
                    Rng& rng) {
  EvalResult out;
  if (episode_count <= 0) return out;
  BehaviorModel policy = actor.online();
  Rng session(rng.next_u64());
  int successes = 0;
  for (int e = 0; e < episode_count; ++e) {
    Rng er = session.fork(static_cast<std::uint64_t>(e));
    MazeState s = maze_reset(maze, er);
    EvalEpisode ep;
    while (true) {
      VectorXd obs = observe(s);
      if (norm) obs = (obs - norm->mean).cwiseQuotient(norm->scale);
      VectorXd a = select_action(policy, critics, obs, config, er);
      MazeStepOut step = maze_step(maze, s, Eigen::Vector2d(a[0], a[1]) * maze.max_force);
      ep.positions.push_back(step.state.position);
      ep.actions.emplace_back(a[0], a[1]);
      s = step.state;
      if (step.done) {
        ep.success = step.reward == 1.0;
        break;
      }
    }
    ep.length = static_cast<int>(ep.positions.size());
    successes += ep.success ? 1 : 0;
    out.lengths.push_back(ep.length);
    out.episodes.push_back(std::move(ep));
  }
  out.success_rate = static_cast<double>(successes) / episode_count;
  std::vector<int> sorted = out.lengths;
  std::sort(sorted.begin(), sorted.end());
  std::size_t mid = sorted.size() / 2;
  out.median_length = sorted.size() % 2 == 1
                          ? sorted[mid]
                          : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return out;
}

void write_trajectories_ldjson(const EvalResult& result, std::ostream& out) {
  for (std::size_t e = 0; e < result.episodes.size(); ++e) {
    const EvalEpisode& ep = result.episodes[e];
    for (std::size_t t = 0; t < ep.positions.size(); ++t) {
      nlohmann::json line = {
          {"episode", e},
          {"step", t},
          {"position", {ep.positions[t].x(), ep.positions[t].y()}},
          {"action", {ep.actions[t].x(), ep.actions[t].y()}},
          {"success", ep.success},
      };
      out << line.dump() << "\n";
    }
  }
}

const char* kMetricsHeader =
    "step,critic_loss,actor_loss,mean_q,mean_adv,pos_adv_frac,eval_success,eval_median_len";

namespace {

void append_metrics_row(std::ostream& out, std::uint64_t step, const StepMetrics& m,
                        const EvalResult& eval) {
  char buf[320];
  std::snprintf(buf, sizeof buf, "%llu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                static_cast<unsigned long long>(step), m.critic_loss, m.actor_loss, m.mean_q,
                m.mean_adv, m.pos_adv_frac, eval.success_rate, eval.median_length);
  out << buf;
}

}  // namespace

EvalResult run_training(TrainerState& st, const MazeSpec& maze, std::ostream* metrics_out,
                        std::ostream* progress) {
  const Normalization* norm =
      st.dataset->normalization.has_value() ? &*st.dataset->normalization : nullptr;
  if (metrics_out) *metrics_out << kMetricsHeader << "\n";
  EvalResult final_eval;
  for (int s = 1; s <= st.config.total_steps; ++s) {
    StepMetrics m = train_step(st);
    bool last = s == st.config.total_steps;
    if (!last && s % st.config.eval_interval != 0) continue;
    int episodes = last ? st.config.final_eval_episodes : st.config.eval_episodes;
    EvalResult ev = evaluate(st.actor, st.critics, maze, norm, episodes, st.config, st.rng);
    if (metrics_out) append_metrics_row(*metrics_out, st.step, m, ev);
    if (progress) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "step %llu/%d critic=%.4f actor=%.4f mean_q=%.3f pos_adv=%.3f "
                    "eval_success=%.2f eval_median=%.1f\n",
                    static_cast<unsigned long long>(st.step), st.config.total_steps, m.critic_loss,
                    m.actor_loss, m.mean_q, m.pos_adv_frac, ev.success_rate, ev.median_length);
      *progress << buf << std::flush;
    }
    if (last) final_eval = std::move(ev);
  }
  return final_eval;
}

}  // namespace adac
