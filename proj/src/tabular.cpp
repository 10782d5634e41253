#include "adac/tabular.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace adac {

void TabularMdp::validate() const {
  if (state_count < 2 || action_count < 1)
    throw std::invalid_argument("tabular mdp needs at least 2 states and 1 action");
  if (transition.rows() != state_count * action_count || transition.cols() != state_count)
    throw std::invalid_argument("transition table shape mismatch");
  for (int r = 0; r < transition.rows(); ++r) {
    if (std::abs(transition.row(r).sum() - 1.0) > 1e-12)
      throw std::invalid_argument("transition row does not sum to 1");
    if ((transition.row(r).array() < 0.0).any())
      throw std::invalid_argument("negative transition probability");
  }
  if (reward.cwiseAbs().maxCoeff() > r_max + 1e-12)
    throw std::invalid_argument("reward exceeds r_max");
  for (int s = 0; s < state_count; ++s) {
    double total = behavior.row(s).sum();
    if (std::abs(total - 1.0) > 1e-12 || (behavior.row(s).array() < 0.0).any())
      throw std::invalid_argument("behavior row is not a distribution");
    if ((behavior.row(s).array() > 0.0).count() == 0)
      throw std::invalid_argument("behavior support is empty");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
}

TabularMdp make_random_mdp(int state_count, int action_count, double behavior_coverage,
                           bool deterministic, Rng& rng, double gamma, double r_max) {
  if (state_count < 2 || action_count < 2)
    throw std::invalid_argument("make_random_mdp: need >= 2 states and actions");
  if (!(behavior_coverage > 0.0 && behavior_coverage <= 1.0))
    throw std::invalid_argument("make_random_mdp: coverage must be in (0,1]");

  TabularMdp mdp;
  mdp.state_count = state_count;
  mdp.action_count = action_count;
  mdp.gamma = gamma;
  mdp.r_max = r_max;
  mdp.transition = Eigen::MatrixXd::Zero(state_count * action_count, state_count);
  mdp.reward.resize(state_count, action_count);
  mdp.behavior = Eigen::MatrixXd::Zero(state_count, action_count);

  for (int s = 0; s < state_count; ++s)
    for (int a = 0; a < action_count; ++a) {
      int r = mdp.row(s, a);
      if (deterministic) {
        mdp.transition(r, static_cast<int>(rng.below(state_count))) = 1.0;
      } else {
        double total = 0.0;
        for (int ns = 0; ns < state_count; ++ns) {
          double w = rng.uniform();
          w *= w;  // skew toward sparse rows
          mdp.transition(r, ns) = w;
          total += w;
        }
        if (total <= 0.0) {
          mdp.transition(r, static_cast<int>(rng.below(state_count))) = 1.0;
        } else {
          mdp.transition.row(r) /= total;
          // renormalize exactly against accumulated rounding
          mdp.transition.row(r) /= mdp.transition.row(r).sum();
        }
      }
      mdp.reward(s, a) = rng.uniform(-r_max, r_max);
    }

  int support = static_cast<int>(std::ceil(behavior_coverage * action_count));
  support = std::max(1, std::min(support, action_count));
  std::vector<int> order(action_count);
  for (int s = 0; s < state_count; ++s) {
    std::iota(order.begin(), order.end(), 0);
    for (int i = action_count - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    double total = 0.0;
    for (int k = 0; k < support; ++k) {
      double w = 0.2 + 0.8 * rng.uniform();
      mdp.behavior(s, order[k]) = w;
      total += w;
    }
    mdp.behavior.row(s) /= total;
    mdp.behavior.row(s) /= mdp.behavior.row(s).sum();
  }
  mdp.validate();
  return mdp;
}

std::string mdp_to_json(const TabularMdp& mdp) {
  nlohmann::json j;
  j["state_count"] = mdp.state_count;
  j["action_count"] = mdp.action_count;
  j["gamma"] = mdp.gamma;
  j["r_max"] = mdp.r_max;
  std::vector<std::vector<double>> trans, rew, beh;
  for (int r = 0; r < mdp.transition.rows(); ++r) {
    std::vector<double> row(mdp.state_count);
    for (int c = 0; c < mdp.state_count; ++c) row[c] = mdp.transition(r, c);
    trans.push_back(std::move(row));
  }
  for (int s = 0; s < mdp.state_count; ++s) {
    std::vector<double> row(mdp.action_count), brow(mdp.action_count);
    for (int a = 0; a < mdp.action_count; ++a) {
      row[a] = mdp.reward(s, a);
      brow[a] = mdp.behavior(s, a);
    }
    rew.push_back(std::move(row));
    beh.push_back(std::move(brow));
  }
  j["transition"] = trans;
  j["reward"] = rew;
  j["behavior"] = beh;
  return j.dump();
}

}  // namespace adac
