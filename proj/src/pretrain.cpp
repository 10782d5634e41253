#include "adac/pretrain.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace adac {

using nn::Graph;
using nn::LossEval;
using nn::NetParams;
using nn::NetSpec;

BehaviorModel make_behavior_model(int obs_dim, int act_dim, int hidden, int diffusion_steps,
                                  int embed_dim, Rng& rng) {
  BehaviorModel m;
  NetSpec spec;
  spec.layer_widths = {act_dim + obs_dim + embed_dim, hidden, hidden, hidden, hidden, act_dim};
  m.noise_net = nn::init_params(spec, rng);
  m.schedule = make_vp_schedule(diffusion_steps);
  m.embedding = timestep_embedding(diffusion_steps, embed_dim);
  return m;
}

ValueModel make_value_model(int obs_dim, int hidden, double tau, Rng& rng) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must be in (0,1)");
  ValueModel m;
  NetSpec spec;
  spec.layer_widths = {obs_dim, hidden, hidden, 1};
  m.net = nn::init_params(spec, rng, /*final_layer_scale=*/0.01);
  m.tau = tau;
  return m;
}

TransitionModel make_transition_model(int obs_dim, int act_dim, int hidden, Rng& rng) {
  TransitionModel m;
  NetSpec spec;
  spec.layer_widths = {obs_dim + act_dim, hidden, hidden, hidden, obs_dim};
  m.net = nn::init_params(spec, rng);
  return m;
}

namespace {

// Per-row diffusion corruption for Eq. 11. Draw order per row: timestep,
// then the noise entries; tests and reruns depend on this order.
struct BcDraw {
  MatrixXd noisy_inputs;  // (noisy action | state | embedding)
  MatrixXd eps;
};

BcDraw draw_bc_corruption(const BehaviorModel& m, const Batch& batch, Rng& rng) {
  const int rows = batch.rows();
  const int act = m.act_dim();
  const int embed = static_cast<int>(m.embedding.cols());
  BcDraw d;
  d.eps.resize(rows, act);
  d.noisy_inputs.resize(rows, act + batch.states.cols() + embed);
  for (int r = 0; r < rows; ++r) {
    int i = 1 + static_cast<int>(rng.below(m.schedule.step_count));
    for (int c = 0; c < act; ++c) d.eps(r, c) = rng.normal();
    double abar = m.schedule.alpha_bars[i - 1];
    d.noisy_inputs.block(r, 0, 1, act) =
        std::sqrt(abar) * batch.actions.row(r) + std::sqrt(1.0 - abar) * d.eps.row(r);
    d.noisy_inputs.block(r, act, 1, batch.states.cols()) = batch.states.row(r);
    d.noisy_inputs.block(r, act + batch.states.cols(), 1, embed) = m.embedding.row(i - 1);
  }
  return d;
}

void build_bc_loss(Graph& g, const BehaviorModel& model, const Batch& batch, Rng& rng) {
  BcDraw d = draw_bc_corruption(model, batch, rng);
  auto pred = g.apply_net(model.noise_net, g.constant(std::move(d.noisy_inputs)));
  g.add_mean_sq(pred, d.eps);
}

void build_expectile_loss(Graph& g, const ValueModel& model, const Batch& batch,
                          double gamma) {
  MatrixXd v_next = nn::forward(model.net, batch.next_states);
  MatrixXd target(batch.rows(), 1);
  for (int r = 0; r < batch.rows(); ++r)
    target(r, 0) = batch.rewards[r] + gamma * (1.0 - batch.dones[r]) * v_next(r, 0);
  auto v = g.apply_net(model.net, g.constant(batch.states));
  auto u = g.scale_shift(v, -1.0, target);  // u = r + gamma (1-done) V(s') - V(s)
  const MatrixXd& uval = g.value(u);
  VectorXd weights(batch.rows());
  for (int r = 0; r < batch.rows(); ++r)
    weights[r] = std::abs(model.tau - (uval(r, 0) < 0.0 ? 1.0 : 0.0)) / batch.rows();
  g.add_weighted_sq(u, weights);
}

void build_transition_loss(Graph& g, const TransitionModel& model, const Batch& batch) {
  MatrixXd inputs(batch.rows(), batch.states.cols() + batch.actions.cols());
  inputs << batch.states, batch.actions;
  auto pred = g.apply_net(model.net, g.constant(std::move(inputs)));
  g.add_mean_sq(pred, batch.next_states);
}

}  // namespace

double bc_loss(const BehaviorModel& model, const Batch& batch, Rng& rng) {
  Graph g(model.noise_net);
  build_bc_loss(g, model, batch, rng);
  return g.loss();
}

void add_bc_term(Graph& g, const BehaviorModel& model, const Batch& batch, Rng& rng) {
  build_bc_loss(g, model, batch, rng);
}

LossEval bc_loss_grad(const BehaviorModel& model, const Batch& batch, Rng& rng) {
  return nn::eval_loss(model.noise_net,
                       [&](Graph& g) { build_bc_loss(g, model, batch, rng); });
}

MatrixXd bc_sample(const BehaviorModel& model, const MatrixXd& states, Rng& rng) {
  const int rows = static_cast<int>(states.rows());
  const int act = model.act_dim();
  const DiffusionSchedule& sc = model.schedule;
  MatrixXd a(rows, act);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < act; ++c) a(r, c) = rng.normal();
  MatrixXd inputs(rows, act + states.cols() + model.embedding.cols());
  inputs.block(0, act, rows, states.cols()) = states;
  for (int i = sc.step_count; i >= 1; --i) {
    inputs.block(0, 0, rows, act) = a;
    inputs.block(0, act + states.cols(), rows, model.embedding.cols()) =
        model.embedding.row(i - 1).replicate(rows, 1);
    MatrixXd eps = nn::forward(model.noise_net, inputs);
    double alpha = sc.alphas[i - 1];
    double coef = sc.betas[i - 1] / std::sqrt(1.0 - sc.alpha_bars[i - 1]);
    a = (a - coef * eps) / std::sqrt(alpha);
    if (i > 1) {
      double sd = std::sqrt(sc.betas[i - 1]);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < act; ++c) a(r, c) += sd * rng.normal();
    }
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

Graph::NodeId bc_sample_node(Graph& g, const BehaviorModel& model, const MatrixXd& states,
                             Rng& rng) {
  const int rows = static_cast<int>(states.rows());
  const int act = model.act_dim();
  const DiffusionSchedule& sc = model.schedule;
  MatrixXd a0(rows, act);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < act; ++c) a0(r, c) = rng.normal();
  auto a = g.constant(std::move(a0));
  auto s = g.constant(states);
  for (int i = sc.step_count; i >= 1; --i) {
    auto emb = g.constant(model.embedding.row(i - 1).replicate(rows, 1));
    auto eps = g.apply_net(model.noise_net, g.concat_cols(a, s, emb));
    double alpha = sc.alphas[i - 1];
    double coef = sc.betas[i - 1] / std::sqrt(1.0 - sc.alpha_bars[i - 1]);
    a = g.lincomb(1.0 / std::sqrt(alpha), a, -coef / std::sqrt(alpha), eps);
    if (i > 1) {
      double sd = std::sqrt(sc.betas[i - 1]);
      MatrixXd z(rows, act);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < act; ++c) z(r, c) = sd * rng.normal();
      a = g.scale_shift(a, 1.0, z);
    }
  }
  return g.clamp(a, -1.0, 1.0);
}

double expectile_value_loss(const ValueModel& model, const Batch& batch, double gamma) {
  Graph g(model.net);
  build_expectile_loss(g, model, batch, gamma);
  return g.loss();
}

LossEval expectile_value_loss_grad(const ValueModel& model, const Batch& batch, double gamma) {
  return nn::eval_loss(model.net,
                       [&](Graph& g) { build_expectile_loss(g, model, batch, gamma); });
}

double transition_loss(const TransitionModel& model, const Batch& batch) {
  Graph g(model.net);
  build_transition_loss(g, model, batch);
  return g.loss();
}

LossEval transition_loss_grad(const TransitionModel& model, const Batch& batch) {
  return nn::eval_loss(model.net, [&](Graph& g) { build_transition_loss(g, model, batch); });
}

namespace {

// Normalized full-data matrices with a train/holdout row split.
struct SplitData {
  MatrixXd states, actions, next_states;
  VectorXd rewards, dones;
  std::vector<std::uint64_t> train, holdout;

  Batch gather(const std::vector<std::uint64_t>& rows) const {
    Batch b;
    int n = static_cast<int>(rows.size());
    b.states.resize(n, states.cols());
    b.actions.resize(n, actions.cols());
    b.next_states.resize(n, next_states.cols());
    b.rewards.resize(n);
    b.dones.resize(n);
    b.indices = rows;
    for (int i = 0; i < n; ++i) {
      auto r = static_cast<Eigen::Index>(rows[i]);
      b.states.row(i) = states.row(r);
      b.actions.row(i) = actions.row(r);
      b.next_states.row(i) = next_states.row(r);
      b.rewards[i] = rewards[r];
      b.dones[i] = dones[r];
    }
    return b;
  }

  Batch sample(int batch_size, Rng& rng) const {
    std::vector<std::uint64_t> rows(batch_size);
    for (auto& r : rows) r = train[rng.below(train.size())];
    return gather(rows);
  }
};

SplitData make_split(const OfflineDataset& d, double holdout_fraction, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(d.size());
  SplitData s;
  s.states.resize(n, d.obs_dim);
  s.actions.resize(n, d.act_dim);
  s.next_states.resize(n, d.obs_dim);
  s.rewards.resize(n);
  s.dones.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const Transition& t = d.transitions[i];
    s.states.row(i) = t.state.transpose();
    s.actions.row(i) = t.action.transpose();
    s.next_states.row(i) = t.next_state.transpose();
    s.rewards[i] = t.reward;
    s.dones[i] = t.done ? 1.0 : 0.0;
  }
  s.states = normalize_states(d, std::move(s.states));
  s.next_states = normalize_states(d, std::move(s.next_states));

  std::vector<std::uint64_t> perm(n);
  for (std::uint64_t i = 0; i < n; ++i) perm[i] = i;
  for (std::uint64_t i = n; i > 1; --i)
    std::swap(perm[i - 1], perm[rng.below(i)]);
  std::uint64_t holdout_count =
      n >= 2 ? std::max<std::uint64_t>(1, static_cast<std::uint64_t>(
                                              std::llround(holdout_fraction * n)))
             : 0;
  if (holdout_count >= n) holdout_count = n - 1;
  s.train.assign(perm.begin(), perm.end() - holdout_count);
  s.holdout.assign(perm.end() - holdout_count, perm.end());
  return s;
}

}  // namespace

PretrainResult pretrain_all(const OfflineDataset& dataset, const PretrainConfig& config,
                            Rng& rng, std::ostream* log) {
  if (dataset.transitions.empty())
    throw std::invalid_argument("pretrain_all: empty dataset");
  SplitData data = make_split(dataset, config.holdout_fraction, rng);
  Batch holdout = data.gather(data.holdout.empty() ? data.train : data.holdout);

  PretrainResult out{
      make_behavior_model(dataset.obs_dim, dataset.act_dim, config.hidden,
                          config.diffusion_steps, config.embed_dim, rng),
      make_value_model(dataset.obs_dim, config.hidden, config.tau, rng),
      make_transition_model(dataset.obs_dim, dataset.act_dim, config.hidden, rng)};

  if (log) *log << "model,step,train_loss,holdout_loss\n";
  // Fixed corruption draws make behavior holdout losses comparable across steps.
  Rng holdout_rng = rng.fork(0xB0);

  auto run_loop = [&](const char* name, int steps, NetParams& params,
                      const std::function<LossEval(Rng&)>& grad_step,
                      const std::function<double()>& holdout_loss, double& loss0,
                      double& loss_final) {
    loss0 = holdout_loss();
    loss_final = loss0;
    if (log) *log << name << ",0,nan," << loss0 << "\n";
    nn::OptimizerState opt = nn::make_optimizer(params, config.learning_rate);
    double train_acc = 0.0;
    int train_n = 0;
    for (int step = 1; step <= steps; ++step) {
      try {
        LossEval ev = grad_step(rng);
        nn::adamw_step(params, ev.grad, opt);
        train_acc += ev.value;
        train_n += 1;
      } catch (const std::exception& e) {
        throw std::runtime_error(std::string(name) + " pretraining failed at step " +
                                 std::to_string(step) + ": " + e.what());
      }
      if (step % config.log_interval == 0 || step == steps) {
        loss_final = holdout_loss();
        if (log)
          *log << name << "," << step << "," << train_acc / train_n << "," << loss_final
               << "\n";
        train_acc = 0.0;
        train_n = 0;
      }
    }
  };

  run_loop(
      "behavior", config.behavior_steps, out.behavior.noise_net,
      [&](Rng& r) { return bc_loss_grad(out.behavior, data.sample(config.batch_size, r), r); },
      [&] {
        Rng h = holdout_rng;
        return bc_loss(out.behavior, holdout, h);
      },
      out.behavior_loss0, out.behavior_loss);

  run_loop(
      "value", config.value_steps, out.value.net,
      [&](Rng& r) {
        return expectile_value_loss_grad(out.value, data.sample(config.batch_size, r),
                                         config.gamma);
      },
      [&] { return expectile_value_loss(out.value, holdout, config.gamma); },
      out.value_loss0, out.value_loss);

  run_loop(
      "transition", config.transition_steps, out.transition.net,
      [&](Rng& r) { return transition_loss_grad(out.transition, data.sample(config.batch_size, r)); },
      [&] { return transition_loss(out.transition, holdout); }, out.transition_loss0,
      out.transition_loss);

  MatrixXd inputs(holdout.rows(), holdout.states.cols() + holdout.actions.cols());
  inputs << holdout.states, holdout.actions;
  MatrixXd err = nn::forward(out.transition.net, inputs) - holdout.next_states;
  out.transition_rmse = err.cwiseAbs2().colwise().mean().cwiseSqrt().transpose();
  return out;
}

}  // namespace adac
