#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "adac/advantage.hpp"
#include "adac/dataset.hpp"
#include "adac/maze.hpp"
#include "adac/nn.hpp"
#include "adac/pretrain.hpp"

namespace adac {

struct TrainConfig {
  double gamma = 0.99;
  double alpha = 1.0;  // actor guidance weight, rescaled by batch mean |Q|
  int backup_count = 3;
  bool use_max_q_backup = true;
  bool use_advantage = true;  // false = ablation arm, modulated advantage forced to 0
  int eval_candidates = 32;
  double eval_softmax_temperature = 0.02;
  double critic_lr = 3e-4;
  double actor_lr = 3e-4;
  double target_rate = 0.005;
  int batch_size = 128;
  int total_steps = 50000;
  int eval_interval = 5000;
  int eval_episodes = 20;        // in-training evaluation
  int final_eval_episodes = 100; // evaluation at the last step
  int hidden = 64;
  std::uint64_t seed = 0;

  // use_max_q_backup=false forces a single candidate.
  int candidates() const { return use_max_q_backup ? backup_count : 1; }
  void validate() const;
};

// Twin critics (clipped double Q) with lagging target copies.
struct CriticPair {
  nn::NetParams q1, q2;
  nn::NetParams target_q1, target_q2;
};

CriticPair make_critic_pair(int obs_dim, int act_dim, int hidden, Rng& rng);

// Min over the two heads, evaluated on (state | action) rows.
VectorXd min_twin_q(const nn::NetParams& head1, const nn::NetParams& head2,
                    const MatrixXd& states, const MatrixXd& actions);

// Diffusion policy with a lagging target copy used for backup candidates.
struct ActorModel {
  nn::NetParams noise_net;
  nn::NetParams target_noise_net;
  DiffusionSchedule schedule;
  MatrixXd embedding;

  // Sampling/loss views; the returned model owns copies of the params.
  BehaviorModel online() const;
  BehaviorModel target() const;
};

ActorModel make_actor_model(int obs_dim, int act_dim, int hidden, int diffusion_steps,
                            int embed_dim, Rng& rng);

// Per-sample TD targets plus batch diagnostics from the same pass.
struct BackupInfo {
  VectorXd targets;
  double mean_modulated_adv = 0.0;  // over all candidates; 0 when advantage is off
  double positive_fraction = 0.0;   // fraction of candidates with modulated adv > 0
};

// Eq. 14 targets with Max-Q backup: per sample draw candidates() actions from
// the target actor at s', score each by min-twin target Q plus (when enabled)
// the softclipped advantage, take the max, and bootstrap with gamma (1-done).
// Batch states must already be normalized. Thresholds come from the oracle
// cache when present (keyed by batch.indices), else are computed on the spot
// from rng.fork(index) substreams. Exactly one rng-consuming call is made
// (the candidate draw), so the stream position matches the standard target.
BackupInfo critic_backup(const Batch& batch, const ActorModel& actor,
                         const CriticPair& critics, const AdvantageOracle& oracle,
                         const TrainConfig& config, Rng& rng);
VectorXd critic_target(const Batch& batch, const ActorModel& actor, const CriticPair& critics,
                       const AdvantageOracle& oracle, const TrainConfig& config, Rng& rng);

// Independent implementation of the plain DQL target r + gamma (1-done)
// min-twin Q(s', a' ~ target actor), for the reduction identity check.
VectorXd standard_bellman_target(const Batch& batch, const ActorModel& actor,
                                 const CriticPair& critics, const TrainConfig& config,
                                 Rng& rng);

// Mean over batch and both twin heads of (target - Q(s,a))^2.
double critic_loss(const Batch& batch, const CriticPair& critics, const VectorXd& targets);
// Single-head term, mean (target - Q(s,a))^2, with gradient.
nn::LossEval critic_head_loss_grad(const nn::NetParams& head, const Batch& batch,
                                   const VectorXd& targets);

struct ActorLossInfo {
  double bc = 0.0;          // Eq. 11 term
  double mean_q = 0.0;      // mean min-twin Q of the sampled actions
  double normalizer = 1.0;  // batch mean |Q| dividing alpha (detached)
};

// Eq. 15: BC term minus alpha/normalizer * mean min-twin Q(s, a~pi), with the
// gradient flowing through the full reverse process. The rng serves the BC
// corruption draws first, then the sampler draws; alpha=0 skips sampling and
// consumes exactly the bc_loss stream. normalizer_override >= 0 pins the
// detached normalizer (finite-difference tests re-evaluate with it fixed).
nn::LossEval actor_loss_grad(const BehaviorModel& actor_net, const Batch& batch,
                             const CriticPair& critics, const TrainConfig& config, Rng& rng,
                             ActorLossInfo* info = nullptr,
                             double normalizer_override = -1.0);

struct StepMetrics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double mean_q = 0.0;      // batch mean of online min-twin Q on dataset (s,a)
  double mean_adv = 0.0;
  double pos_adv_frac = 0.0;
};

// All mutable training state. The dataset and oracle models stay frozen; the
// oracle's threshold cache is precomputed at construction.
struct TrainerState {
  TrainConfig config;
  const OfflineDataset* dataset = nullptr;
  double action_scale = 1.0;  // dataset actions divided by this before use
  ActorModel actor;
  CriticPair critics;
  AdvantageOracle oracle;
  nn::OptimizerState q1_opt, q2_opt, actor_opt;
  Rng rng{0};
  std::uint64_t step = 0;
};

TrainerState make_trainer(const OfflineDataset& dataset, const PretrainResult& pretrained,
                          const AdvantageConfig& adv_config, const TrainConfig& config,
                          double action_scale = 1.0);

// One iteration of Algorithm 1: sample batch, critic regression on backup
// targets, actor update, soft target updates.
StepMetrics train_step(TrainerState& st);

// Draw eval_candidates actions from the actor at one (normalized) state and
// sample among them from softmax(min-twin Q / temperature).
VectorXd select_action(const BehaviorModel& actor_net, const CriticPair& critics,
                       const VectorXd& state, const TrainConfig& config, Rng& rng);

struct EvalEpisode {
  std::vector<Eigen::Vector2d> positions;  // position after each step
  std::vector<Eigen::Vector2d> actions;    // action applied at each step
  int length = 0;
  bool success = false;
};

struct EvalResult {
  double success_rate = 0.0;
  double median_length = 0.0;
  std::vector<int> lengths;
  std::vector<EvalEpisode> episodes;
};

// Rolls out episodes with select_action on the online actor. States are
// normalized with `norm` when given. Episodes use rng.fork substreams of a
// fresh session key, so results are order-independent and the caller's
// stream advances by one draw.
EvalResult evaluate(const ActorModel& actor, const CriticPair& critics, const MazeSpec& maze,
                    const Normalization* norm, int episode_count, const TrainConfig& config,
                    Rng& rng);

// One JSON object per line: episode, step, position, action.
void write_trajectories_ldjson(const EvalResult& result, std::ostream& out);

extern const char* kMetricsHeader;  // step,critic_loss,...,eval_median_len

// Runs config.total_steps iterations, evaluating every eval_interval steps
// (final_eval_episodes at the last step) and appending one CSV row per
// evaluation to metrics_out. progress, when given, gets one line per
// evaluation. Returns the final evaluation.
EvalResult run_training(TrainerState& st, const MazeSpec& maze, std::ostream* metrics_out,
                        std::ostream* progress = nullptr);

}  // namespace adac
