#pragma once

#include <iosfwd>

#include "adac/dataset.hpp"
#include "adac/diffusion.hpp"
#include "adac/nn.hpp"

namespace adac {

// Diffusion behavior policy: noise_net maps
// (noisy action | state | timestep embedding) -> predicted noise.
struct BehaviorModel {
  nn::NetParams noise_net;
  DiffusionSchedule schedule;
  MatrixXd embedding;  // row i-1 = embedding of timestep i

  int act_dim() const { return noise_net.spec.output_dim(); }
  int obs_dim() const {
    return noise_net.spec.input_dim() - act_dim() - static_cast<int>(embedding.cols());
  }
};

struct ValueModel {
  nn::NetParams net;  // state -> scalar
  double tau = 0.9;
};

struct TransitionModel {
  nn::NetParams net;  // (state | action) -> next state
};

BehaviorModel make_behavior_model(int obs_dim, int act_dim, int hidden, int diffusion_steps,
                                  int embed_dim, Rng& rng);
ValueModel make_value_model(int obs_dim, int hidden, double tau, Rng& rng);
TransitionModel make_transition_model(int obs_dim, int act_dim, int hidden, Rng& rng);

// Eq. 11: mean over the batch of |eps - eps_theta(sqrt(abar_i) a +
// sqrt(1-abar_i) eps, s, i)|^2, i uniform in {1..T}. The rng is consumed.
double bc_loss(const BehaviorModel& model, const Batch& batch, Rng& rng);
nn::LossEval bc_loss_grad(const BehaviorModel& model, const Batch& batch, Rng& rng);

// Adds the same noise-prediction term (same draws, same arithmetic) to an
// existing graph, so composite objectives can embed it.
void add_bc_term(nn::Graph& g, const BehaviorModel& model, const Batch& batch, Rng& rng);

// DDPM ancestral sampling (one action per input row), clamped to [-1,1].
MatrixXd bc_sample(const BehaviorModel& model, const MatrixXd& states, Rng& rng);

// Differentiable version of bc_sample: identical arithmetic and rng draw
// order, built on the graph so gradients reach the supplied noise net.
nn::Graph::NodeId bc_sample_node(nn::Graph& g, const BehaviorModel& model,
                                 const MatrixXd& states, Rng& rng);

// Eq. 12 with the asymmetric L2 weight |tau - 1(u<0)|; the bootstrapped
// term gamma * (1-done) * V(s') is a constant (semi-gradient).
double expectile_value_loss(const ValueModel& model, const Batch& batch, double gamma);
nn::LossEval expectile_value_loss_grad(const ValueModel& model, const Batch& batch,
                                       double gamma);

// Eq. 13: mean |P(s,a) - s'|^2.
double transition_loss(const TransitionModel& model, const Batch& batch);
nn::LossEval transition_loss_grad(const TransitionModel& model, const Batch& batch);

struct PretrainConfig {
  int behavior_steps = 30000;
  int value_steps = 30000;
  int transition_steps = 30000;
  int batch_size = 256;
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double tau = 0.9;
  int diffusion_steps = 10;
  int embed_dim = 16;
  int hidden = 64;
  double holdout_fraction = 0.05;
  int log_interval = 1000;
};

struct PretrainResult {
  BehaviorModel behavior;
  ValueModel value;
  TransitionModel transition;
  // Holdout losses before and after each loop.
  double behavior_loss0 = 0.0, behavior_loss = 0.0;
  double value_loss0 = 0.0, value_loss = 0.0;
  double transition_loss0 = 0.0, transition_loss = 0.0;
  // Held-out per-dimension transition RMSE (normalized space if enabled).
  VectorXd transition_rmse;
};

// Three independent AdamW loops over a deterministic 95/5 train/holdout
// split. When log is given, writes CSV lines "model,step,holdout_loss".
// States and next states are normalized first when the dataset carries
// normalization. Aborts with diagnostics on non-finite losses.
PretrainResult pretrain_all(const OfflineDataset& dataset, const PretrainConfig& config,
                            Rng& rng, std::ostream* log = nullptr);

}  // namespace adac
