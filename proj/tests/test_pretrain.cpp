#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "adac/collect.hpp"
#include "adac/pretrain.hpp"
#include "adac/verify.hpp"

using namespace adac;

namespace {

Batch make_batch(MatrixXd states, MatrixXd actions, VectorXd rewards, MatrixXd next_states,
                 VectorXd dones) {
  Batch b;
  b.states = std::move(states);
  b.actions = std::move(actions);
  b.rewards = std::move(rewards);
  b.next_states = std::move(next_states);
  b.dones = std::move(dones);
  b.indices.assign(size_t(b.states.rows()), 0);
  return b;
}

Batch random_batch(int rows, int obs, int act, Rng& rng) {
  MatrixXd s(rows, obs), a(rows, act), s2(rows, obs);
  VectorXd r(rows), d(rows);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < obs; ++c) {
      s(i, c) = rng.uniform(-1.0, 1.0);
      s2(i, c) = rng.uniform(-1.0, 1.0);
    }
    for (int c = 0; c < act; ++c) a(i, c) = rng.uniform(-1.0, 1.0);
    r(i) = rng.uniform(-1.0, 1.0);
    d(i) = rng.uniform() < 0.2 ? 1.0 : 0.0;
  }
  return make_batch(std::move(s), std::move(a), std::move(r), std::move(s2), std::move(d));
}

// Single linear layer with no activation; values set by the caller.
nn::NetParams linear_net(int in, int out) {
  nn::NetSpec spec;
  spec.layer_widths = {in, out};
  spec.activation = nn::Activation::kIdentity;
  nn::NetParams p;
  p.spec = spec;
  p.values = VectorXd::Zero(spec.param_count());
  return p;
}

}  // namespace

TEST_CASE("vp schedule invariants hold for T in 1..50") {
  for (int t = 1; t <= 50; ++t) {
    DiffusionSchedule s = make_vp_schedule(t);
    CHECK(s.step_count == t);
    double bar = 1.0;
    for (int i = 0; i < t; ++i) {
      CHECK(s.betas[i] > 0.0);
      CHECK(s.betas[i] < 1.0);
      if (i > 0) {
        CHECK(s.betas[i] > s.betas[i - 1]);
        CHECK(s.alpha_bars[i] < s.alpha_bars[i - 1]);
      }
      bar *= 1.0 - s.betas[i];
      CHECK(std::abs(s.alpha_bars[i] - bar) <= 1e-12);
    }
    // The exponents telescope: abar_T = exp(-(beta_min + (beta_max-beta_min)/2))
    // independent of T.
    CHECK(std::abs(s.alpha_bars[t - 1] - std::exp(-5.05)) < 1e-12);
  }
  // T=1 closed form.
  DiffusionSchedule one = make_vp_schedule(1);
  CHECK(one.betas[0] == doctest::Approx(1.0 - std::exp(-0.1 - 4.95)).epsilon(1e-15));
  CHECK_THROWS_AS(make_vp_schedule(0), std::invalid_argument);
}

TEST_CASE("vp schedule alpha_bar table matches an independent product loop bitwise") {
  DiffusionSchedule s = make_vp_schedule(10);
  double bar = 1.0;
  for (int i = 1; i <= 10; ++i) {
    double expo = -0.1 / 10.0 - (2.0 * i - 1.0) * 9.9 / 200.0;
    double beta = 1.0 - std::exp(expo);
    CHECK(s.betas[i - 1] == beta);
    bar *= 1.0 - beta;
    CHECK(s.alpha_bars[i - 1] == bar);
  }
}

TEST_CASE("timestep embedding is the sinusoidal table") {
  MatrixXd e = timestep_embedding(10, 4);
  REQUIRE(e.rows() == 10);
  REQUIRE(e.cols() == 4);
  CHECK(e(0, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
  CHECK(e(0, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
  CHECK(e(0, 2) == doctest::Approx(std::sin(0.01)).epsilon(1e-15));
  CHECK(e(0, 3) == doctest::Approx(std::cos(0.01)).epsilon(1e-15));
  CHECK(e(6, 0) == doctest::Approx(std::sin(7.0)).epsilon(1e-15));
  for (int r = 0; r < 10; ++r) CHECK(e.row(r).squaredNorm() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(timestep_embedding(5, 3), std::invalid_argument);
}

TEST_CASE("bc loss with a zero net is the chi-square mean") {
  Rng init(60);
  BehaviorModel m = make_behavior_model(3, 2, 16, 10, 8, init);
  m.noise_net.values.setZero();
  Rng data(61);
  Batch batch = random_batch(4096, 3, 2, data);
  Rng draw(62);
  double loss = bc_loss(m, batch, draw);
  // loss = mean |eps|^2, E = act_dim, Var per row = 2*act_dim.
  double sigma = std::sqrt(2.0 * 2.0 / 4096.0);
  CHECK(std::abs(loss - 2.0) < 4.0 * sigma);

  Rng again(62);
  CHECK(bc_loss(m, batch, again) == loss);
  Rng forked(62);
  CHECK(bc_loss_grad(m, batch, forked).value == loss);
}

TEST_CASE("bc loss vanishes for an oracle noise extractor") {
  // T=1 with zero actions: the noisy input is sqrt(1-abar)*eps, so a linear
  // layer dividing the action block by sqrt(1-abar) recovers eps exactly.
  const int obs = 4, act = 2, embed = 2;
  BehaviorModel m;
  m.schedule = make_vp_schedule(1);
  m.embedding = timestep_embedding(1, embed);
  m.noise_net = linear_net(act + obs + embed, act);
  double scale = 1.0 / std::sqrt(1.0 - m.schedule.alpha_bars[0]);
  const int in = act + obs + embed;
  for (int c = 0; c < act; ++c) m.noise_net.values[c * in + c] = scale;

  Rng data(63);
  Batch batch = random_batch(64, obs, act, data);
  batch.actions.setZero();
  Rng draw(64);
  CHECK(bc_loss(m, batch, draw) < 1e-20);
}

TEST_CASE("bc loss gradient passes the finite-difference check") {
  Rng init(65);
  BehaviorModel m = make_behavior_model(2, 1, 8, 3, 4, init);
  Rng data(66);
  Batch batch = random_batch(3, 2, 1, data);

  Rng draw(67);
  nn::LossEval ev = bc_loss_grad(m, batch, draw);
  VectorXd fd = nn::finite_difference(m.noise_net, [&](const nn::NetParams& p) {
    BehaviorModel probe = m;
    probe.noise_net = p;
    Rng r(67);
    return bc_loss(probe, batch, r);
  });
  CHECK((ev.grad - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
}

TEST_CASE("bc sample single-step closed form and determinism") {
  Rng init(68);
  BehaviorModel m = make_behavior_model(2, 2, 8, 1, 4, init);
  m.noise_net.values.setZero();
  MatrixXd states(5, 2);
  Rng srng(69);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 2; ++c) states(r, c) = srng.uniform(-1.0, 1.0);

  Rng draw(70);
  MatrixXd out = bc_sample(m, states, draw);

  Rng oracle_rng(70);
  MatrixXd a(5, 2);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 2; ++c) a(r, c) = oracle_rng.normal();
  MatrixXd expect =
      (a / std::sqrt(m.schedule.alphas[0])).cwiseMax(-1.0).cwiseMin(1.0);
  CHECK((out - expect).lpNorm<Eigen::Infinity>() == 0.0);

  Rng draw2(70);
  CHECK((bc_sample(m, states, draw2) - out).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(out.maxCoeff() <= 1.0);
  CHECK(out.minCoeff() >= -1.0);
}

TEST_CASE("graph sampler matches the plain sampler and is differentiable") {
  Rng init(71);
  BehaviorModel m = make_behavior_model(2, 2, 8, 4, 4, init);
  MatrixXd states(3, 2);
  Rng srng(72);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) states(r, c) = srng.uniform(-1.0, 1.0);

  Rng ra(73);
  MatrixXd plain = bc_sample(m, states, ra);
  nn::Graph g(m.noise_net);
  Rng rb(73);
  auto node = bc_sample_node(g, m, states, rb);
  CHECK((g.value(node) - plain).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(plain.maxCoeff() <= 1.0);
  CHECK(plain.minCoeff() >= -1.0);

  // Gradient through the full reverse chain against finite differences. An
  // untrained net drives every sample into the clamp (saturated gradient), so
  // use a linear noise net tuned to keep the chain inside the box: with
  // eps = c*a the per-step factor is (1 - coef_i c)/sqrt(alpha_i), and c=1.1
  // makes the two-step product about -0.06.
  BehaviorModel tiny;
  tiny.schedule = make_vp_schedule(2);
  tiny.embedding = timestep_embedding(2, 2);
  tiny.noise_net = linear_net(1 + 1 + 2, 1);
  tiny.noise_net.values << 1.1, 0.2, 0.02, -0.03, 0.05;  // a, s, emb, emb, bias
  MatrixXd tiny_states(4, 1);
  tiny_states << 0.3, -0.6, 0.05, 0.8;
  MatrixXd target(4, 1);
  target << 0.1, -0.2, 0.3, 0.0;
  auto build = [&](nn::Graph& gr, const BehaviorModel& model) {
    Rng r(75);
    gr.add_mean_sq(bc_sample_node(gr, model, tiny_states, r), target);
  };
  nn::LossEval ev = nn::eval_loss(tiny.noise_net,
                                  [&](nn::Graph& gr) { build(gr, tiny); });
  VectorXd fd = nn::finite_difference(tiny.noise_net, [&](const nn::NetParams& p) {
    BehaviorModel probe = tiny;
    probe.noise_net = p;
    nn::Graph gr(probe.noise_net);
    build(gr, probe);
    return gr.loss();
  });
  CHECK(ev.grad.norm() > 0.0);
  CHECK((ev.grad - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
}

TEST_CASE("expectile value loss evaluates Eq 4 weights") {
  nn::NetParams net = linear_net(1, 1);
  ValueModel m;
  m.net = net;
  m.tau = 0.9;

  MatrixXd s(1, 1), s2(1, 1);
  s << 0.0;
  s2 << 0.0;
  // V == 0 everywhere: u = r.
  Batch plus = make_batch(s, MatrixXd::Zero(1, 1), VectorXd::Constant(1, 1.0), s2,
                          VectorXd::Zero(1));
  CHECK(expectile_value_loss(m, plus, 0.99) == doctest::Approx(0.9).epsilon(1e-14));
  Batch minus = make_batch(s, MatrixXd::Zero(1, 1), VectorXd::Constant(1, -1.0), s2,
                           VectorXd::Zero(1));
  CHECK(expectile_value_loss(m, minus, 0.99) == doctest::Approx(0.1).epsilon(1e-14));
  Batch zero = make_batch(s, MatrixXd::Zero(1, 1), VectorXd::Zero(1), s2, VectorXd::Zero(1));
  CHECK(expectile_value_loss(m, zero, 0.99) == 0.0);
}

TEST_CASE("expectile value loss at tau=0.5 is half the mean squared TD error") {
  Rng init(76);
  ValueModel m = make_value_model(3, 8, 0.5, init);
  Rng data(77);
  Batch batch = random_batch(32, 3, 1, data);
  double gamma = 0.9;
  MatrixXd v = nn::forward(m.net, batch.states);
  MatrixXd vn = nn::forward(m.net, batch.next_states);
  double acc = 0.0;
  for (int r = 0; r < 32; ++r) {
    double u = batch.rewards[r] + gamma * (1.0 - batch.dones[r]) * vn(r, 0) - v(r, 0);
    acc += u * u;
  }
  CHECK(expectile_value_loss(m, batch, gamma) == doctest::Approx(0.5 * acc / 32).epsilon(1e-12));
}

TEST_CASE("expectile value loss masks the bootstrap term on done rows") {
  // Constant model V == c via the bias of a linear head.
  nn::NetParams net = linear_net(1, 1);
  const double c = 0.7;
  net.values[1] = c;  // bias slot of the 1x1 layer
  ValueModel m;
  m.net = net;
  m.tau = 0.5;

  MatrixXd s(2, 1), s2(2, 1);
  s << 0.0, 0.0;
  s2 << 5.0, 5.0;  // weight is zero so V(s') = c regardless
  VectorXd rewards(2), dones(2);
  rewards << 1.0, 1.0;
  dones << 1.0, 0.0;
  Batch batch = make_batch(s, MatrixXd::Zero(2, 1), rewards, s2, dones);
  double gamma = 0.9;
  double u_done = 1.0 - c;
  double u_live = 1.0 + gamma * c - c;
  double expect = 0.5 * (u_done * u_done + u_live * u_live) / 2.0;
  CHECK(expectile_value_loss(m, batch, gamma) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("expectile value loss gradient passes the frozen-target finite-difference check") {
  // The loss is a semi-gradient: V(s') is detached, so finite differences must
  // hold the target fixed at the unperturbed parameters.
  Rng init(78);
  ValueModel m = make_value_model(2, 8, 0.8, init);
  Rng data(79);
  Batch batch = random_batch(16, 2, 1, data);
  const double gamma = 0.9;
  MatrixXd v_next = nn::forward(m.net, batch.next_states);
  VectorXd target(batch.rows());
  for (int r = 0; r < batch.rows(); ++r)
    target[r] = batch.rewards[r] + gamma * (1.0 - batch.dones[r]) * v_next(r, 0);

  nn::LossEval ev = expectile_value_loss_grad(m, batch, gamma);
  VectorXd fd = nn::finite_difference(m.net, [&](const nn::NetParams& p) {
    MatrixXd v = nn::forward(p, batch.states);
    double acc = 0.0;
    for (int r = 0; r < batch.rows(); ++r) {
      double u = target[r] - v(r, 0);
      acc += std::abs(m.tau - (u < 0.0 ? 1.0 : 0.0)) * u * u;
    }
    return acc / batch.rows();
  });
  CHECK((ev.grad - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
}

TEST_CASE("expectile regression minimizer matches the exact expectile") {
  // gamma = 0 decouples the states: the minimizer of the loss at each state is
  // the exact tau-expectile of that state's reward atoms.
  const double tau = 0.8;
  MatrixXd s(8, 1), s2(8, 1);
  VectorXd r(8);
  // State 0: rewards {0 x3, 1 x1}; state 1: rewards {-1 x2, 0.5, 2}.
  s << 0, 0, 0, 0, 1, 1, 1, 1;
  s2 = s;
  r << 0, 0, 0, 1, -1, -1, 0.5, 2;
  Batch batch = make_batch(s, MatrixXd::Zero(8, 1), r, s2, VectorXd::Ones(8));

  ValueModel m;
  m.net = linear_net(1, 1);
  m.tau = tau;
  nn::OptimizerState opt = nn::make_optimizer(m.net, 0.05);
  const int iters = 6000;
  for (int it = 1; it <= iters; ++it) {
    opt.learning_rate = 0.05 * (1.0 - double(it - 1) / iters);
    nn::LossEval ev = expectile_value_loss_grad(m, batch, 0.0);
    nn::adamw_step(m.net, ev.grad, opt);
  }
  MatrixXd probe(2, 1);
  probe << 0.0, 1.0;
  MatrixXd v = nn::forward(m.net, probe);

  VectorXd atoms0(2), probs0(2);
  atoms0 << 0.0, 1.0;
  probs0 << 0.75, 0.25;
  VectorXd atoms1(3), probs1(3);
  atoms1 << -1.0, 0.5, 2.0;
  probs1 << 0.5, 0.25, 0.25;
  CHECK(std::abs(v(0, 0) - exact_expectile(atoms0, probs0, tau)) < 1e-3);
  CHECK(std::abs(v(1, 0) - exact_expectile(atoms1, probs1, tau)) < 1e-3);
}

TEST_CASE("bootstrapped expectile regression matches the tabular fixed point") {
  // Two states, deterministic rewards per (s,a), empirical transition counts
  // mirrored exactly in a TabularMdp; the trained linear V must land on
  // verify's fixed point.
  const double tau = 0.75, gamma = 0.9;
  // Rows: (s, a, r, s').  State 0, action 0: r=0.2, 3/4 to state 0, 1/4 to 1.
  // State 0, action 1: r=-0.3, always to state 1.
  // State 1, action 0: r=1.0, always to state 0.  Behavior: uniform over the
  // listed actions (state 0 has 4+4 rows, state 1 has 4).
  const int rows = 12;
  MatrixXd s(rows, 1), s2(rows, 1), a(rows, 1);
  VectorXd r(rows);
  int k = 0;
  auto put = [&](double st, double act, double rew, double nxt) {
    s(k, 0) = st;
    a(k, 0) = act;
    r(k) = rew;
    s2(k, 0) = nxt;
    ++k;
  };
  put(0, 0, 0.2, 0);
  put(0, 0, 0.2, 0);
  put(0, 0, 0.2, 0);
  put(0, 0, 0.2, 1);
  for (int i = 0; i < 4; ++i) put(0, 1, -0.3, 1);
  for (int i = 0; i < 4; ++i) put(1, 0, 1.0, 0);
  REQUIRE(k == rows);
  Batch batch = make_batch(s, a, r, s2, VectorXd::Zero(rows));

  ValueModel m;
  m.net = linear_net(1, 1);
  m.tau = tau;
  nn::OptimizerState opt = nn::make_optimizer(m.net, 0.05);
  const int iters = 8000;
  for (int it = 1; it <= iters; ++it) {
    opt.learning_rate = 0.05 * (1.0 - double(it - 1) / iters);
    nn::LossEval ev = expectile_value_loss_grad(m, batch, gamma);
    nn::adamw_step(m.net, ev.grad, opt);
  }
  MatrixXd probe(2, 1);
  probe << 0.0, 1.0;
  MatrixXd v = nn::forward(m.net, probe);

  TabularMdp mdp;
  mdp.state_count = 2;
  mdp.action_count = 2;
  mdp.gamma = gamma;
  mdp.transition = MatrixXd::Zero(4, 2);
  mdp.transition.row(0) << 0.75, 0.25;  // (0, a0)
  mdp.transition.row(1) << 0.0, 1.0;    // (0, a1)
  mdp.transition.row(2) << 1.0, 0.0;    // (1, a0)
  mdp.transition.row(3) << 1.0, 0.0;    // (1, a1) unused filler
  mdp.reward = MatrixXd::Zero(2, 2);
  mdp.reward << 0.2, -0.3, 1.0, 0.0;
  mdp.behavior = MatrixXd::Zero(2, 2);
  mdp.behavior << 0.5, 0.5, 1.0, 0.0;
  mdp.validate();
  VectorXd fp = fixed_point_v_tau(mdp, tau);
  CHECK(std::abs(v(0, 0) - fp(0)) < 1e-3);
  CHECK(std::abs(v(1, 0) - fp(1)) < 1e-3);
}

TEST_CASE("transition loss on perfect and zero models") {
  // Perfect model: s' = s and the net is the identity embedding.
  nn::NetParams net = linear_net(3, 2);  // input (s|a) with obs 2, act 1
  net.values.setZero();
  net.values[0 * 3 + 0] = 1.0;  // column 0 reads s0
  net.values[1 * 3 + 1] = 1.0;  // column 1 reads s1
  TransitionModel m;
  m.net = net;
  Rng data(80);
  Batch batch = random_batch(16, 2, 1, data);
  batch.next_states = batch.states;
  CHECK(transition_loss(m, batch) == 0.0);

  TransitionModel zero;
  zero.net = linear_net(3, 2);
  for (int i = 0; i < 16; ++i) batch.next_states.row(i).normalize();
  CHECK(transition_loss(zero, batch) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("transition loss gradient passes the finite-difference check") {
  Rng init(81);
  TransitionModel m = make_transition_model(2, 1, 8, init);
  Rng data(82);
  Batch batch = random_batch(12, 2, 1, data);
  nn::LossEval ev = transition_loss_grad(m, batch);
  VectorXd fd = nn::finite_difference(m.net, [&](const nn::NetParams& p) {
    TransitionModel probe = m;
    probe.net = p;
    return transition_loss(probe, batch);
  });
  CHECK((ev.grad - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
}

TEST_CASE("diffusion sampler covers both modes of a bimodal action set") {
  // Spec'd Monte Carlo: actions at (+-0.5, 0), constant state.
  const int n = 256;
  MatrixXd s = MatrixXd::Zero(n, 2), a(n, 2);
  for (int i = 0; i < n; ++i) a.row(i) << (i % 2 == 0 ? 0.5 : -0.5), 0.0;
  Batch batch = make_batch(s, a, VectorXd::Zero(n), s, VectorXd::Zero(n));

  Rng init(83);
  BehaviorModel m = make_behavior_model(2, 2, 32, 10, 8, init);
  nn::OptimizerState opt = nn::make_optimizer(m.noise_net, 1e-3);
  Rng train(84);
  for (int step = 0; step < 3000; ++step) {
    nn::LossEval ev = bc_loss_grad(m, batch, train);
    nn::adamw_step(m.noise_net, ev.grad, opt);
  }

  Rng draw(85);
  MatrixXd samples = bc_sample(m, MatrixXd::Zero(1000, 2), draw);
  int near_pos = 0, near_neg = 0;
  for (int i = 0; i < 1000; ++i) {
    double dp = std::hypot(samples(i, 0) - 0.5, samples(i, 1));
    double dn = std::hypot(samples(i, 0) + 0.5, samples(i, 1));
    if (dp < 0.15) ++near_pos;
    if (dn < 0.15) ++near_neg;
  }
  CHECK(near_pos >= 200);
  CHECK(near_neg >= 200);
}

TEST_CASE("pretrain_all is deterministic, respects steps=0, and learns") {
  MazeSpec maze = make_maze("desk");
  CollectOptions opts;
  opts.trajectory_count = 40;
  Rng collect_rng(86);
  OfflineDataset data = to_dataset(collect_scripted_dataset(maze, opts, collect_rng));

  PretrainConfig quick;
  quick.behavior_steps = 0;
  quick.value_steps = 0;
  quick.transition_steps = 0;
  Rng r0a(87), r0b(87);
  PretrainResult za = pretrain_all(data, quick, r0a);
  PretrainResult zb = pretrain_all(data, quick, r0b);
  CHECK(za.behavior.noise_net.values == zb.behavior.noise_net.values);
  CHECK(za.value_loss == za.value_loss0);
  CHECK(za.behavior_loss == za.behavior_loss0);
  CHECK(za.value.net.values.allFinite());

  PretrainConfig cfg;
  cfg.behavior_steps = 1500;
  cfg.value_steps = 2500;
  cfg.transition_steps = 2500;
  cfg.hidden = 64;
  cfg.batch_size = 128;
  cfg.log_interval = 500;
  Rng ra(88), rb(88);
  std::ostringstream log_a;
  PretrainResult pa = pretrain_all(data, cfg, ra, &log_a);
  PretrainResult pb = pretrain_all(data, cfg, rb);

  // Bit-identical checkpoints for a fixed seed.
  std::ostringstream ca, cb;
  nn::save_params(pa.behavior.noise_net, ca);
  nn::save_params(pb.behavior.noise_net, cb);
  CHECK(ca.str() == cb.str());
  CHECK(pa.value.net.values == pb.value.net.values);
  CHECK(pa.transition.net.values == pb.transition.net.values);

  // Learning-curve sanity at reduced scale.
  CHECK(pa.behavior_loss < pa.behavior_loss0);
  CHECK(pa.value_loss < pa.value_loss0 / 3.0);
  CHECK(pa.transition_loss < pa.transition_loss0 / 10.0);
  REQUIRE(pa.transition_rmse.size() == 4);
  CHECK(pa.transition_rmse.maxCoeff() < 0.25);

  // CSV layout: header plus step-0 and per-interval rows for each model.
  std::string csv = log_a.str();
  CHECK(csv.rfind("model,step,train_loss,holdout_loss\n", 0) == 0);
  CHECK(csv.find("behavior,0,nan,") != std::string::npos);
  CHECK(csv.find("value,2500,") != std::string::npos);
  CHECK(csv.find("transition,500,") != std::string::npos);
}
