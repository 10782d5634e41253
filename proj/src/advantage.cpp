#include "adac/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adac {

void AdvantageConfig::validate() const {
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw std::invalid_argument("advantage config: kappa must be in (0,1]");
  if (sample_count < 1)
    throw std::invalid_argument("advantage config: sample_count must be positive");
  if (!(lambda_pos > 0.0) || !(lambda_neg > 0.0))
    throw std::invalid_argument("advantage config: softclip scales must be positive");
}

double quantile(const VectorXd& values, double kappa) {
  if (values.size() == 0) throw std::invalid_argument("quantile: empty value list");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw std::invalid_argument("quantile: kappa must be in (0,1]");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  double rank = kappa * double(sorted.size() - 1);
  auto lo = size_t(std::floor(rank));
  auto hi = size_t(std::ceil(rank));
  if (hi >= sorted.size()) hi = sorted.size() - 1;
  return sorted[lo] + (rank - double(lo)) * (sorted[hi] - sorted[lo]);
}

double softclip(double x, double lambda_pos, double lambda_neg) {
  double l = x >= 0.0 ? lambda_pos : lambda_neg;
  return l * std::tanh(x / l);
}

double next_state_value(const AdvantageOracle& oracle, const VectorXd& state,
                        const VectorXd& action) {
  MatrixXd input(1, state.size() + action.size());
  input << state.transpose(), action.transpose();
  MatrixXd next = nn::forward(oracle.dynamics.net, input);
  return nn::forward(oracle.value.net, next)(0, 0);
}

double threshold_from_actions(const AdvantageOracle& oracle, const VectorXd& state,
                              const MatrixXd& actions) {
  if (actions.rows() == 0) throw std::invalid_argument("threshold: no action samples");
  VectorXd values(actions.rows());
  for (Eigen::Index i = 0; i < actions.rows(); ++i)
    values(i) = next_state_value(oracle, state, actions.row(i).transpose());
  return quantile(values, oracle.config.kappa);
}

double threshold(const AdvantageOracle& oracle, const VectorXd& state, Rng& rng) {
  const int n = oracle.config.sample_count;
  MatrixXd states = state.transpose().replicate(n, 1);
  MatrixXd actions = bc_sample(oracle.behavior, states, rng);
  return threshold_from_actions(oracle, state, actions);
}

double raw_advantage(const AdvantageOracle& oracle, const VectorXd& state,
                     const VectorXd& action, Rng& rng) {
  double th = threshold(oracle, state, rng);
  return next_state_value(oracle, state, action) - th;
}

double modulated_advantage(const AdvantageOracle& oracle, const VectorXd& state,
                           const VectorXd& action, Rng& rng) {
  return softclip(raw_advantage(oracle, state, action, rng), oracle.config.lambda_pos,
                  oracle.config.lambda_neg);
}

double cached_threshold(const AdvantageOracle& oracle, std::uint64_t index) {
  if (!oracle.threshold_cache)
    throw std::logic_error("advantage oracle: threshold cache not built");
  if (index >= oracle.threshold_cache->size())
    throw std::out_of_range("advantage oracle: cache index out of range");
  return (*oracle.threshold_cache)[index];
}

double raw_advantage_cached(const AdvantageOracle& oracle, std::uint64_t index,
                            const VectorXd& state, const VectorXd& action) {
  return next_state_value(oracle, state, action) - cached_threshold(oracle, index);
}

double modulated_advantage_cached(const AdvantageOracle& oracle, std::uint64_t index,
                                  const VectorXd& state, const VectorXd& action) {
  return softclip(raw_advantage_cached(oracle, index, state, action),
                  oracle.config.lambda_pos, oracle.config.lambda_neg);
}

void precompute_thresholds(AdvantageOracle& oracle, const OfflineDataset& dataset,
                           Rng& rng) {
  oracle.config.validate();
  const auto count = dataset.transitions.size();
  std::vector<double> cache(count);
  if (count > 0) {
    MatrixXd next_states(count, dataset.obs_dim);
    for (size_t i = 0; i < count; ++i)
      next_states.row(Eigen::Index(i)) = dataset.transitions[i].next_state.transpose();
    next_states = normalize_states(dataset, std::move(next_states));
    for (size_t i = 0; i < count; ++i) {
      Rng sub = rng.fork(i);
      cache[i] = threshold(oracle, next_states.row(Eigen::Index(i)).transpose(), sub);
    }
  }
  oracle.threshold_cache = std::move(cache);
}

AdvantageStats advantage_stats(const AdvantageOracle& oracle, const OfflineDataset& dataset,
                               Rng& rng) {
  oracle.config.validate();
  AdvantageStats out;
  const auto count = dataset.transitions.size();
  if (count == 0) return out;
  MatrixXd states(count, dataset.obs_dim);
  for (size_t i = 0; i < count; ++i)
    states.row(Eigen::Index(i)) = dataset.transitions[i].state.transpose();
  states = normalize_states(dataset, std::move(states));

  double pos_sum = 0.0, neg_sum = 0.0;
  std::uint64_t pos_n = 0, neg_n = 0;
  for (size_t i = 0; i < count; ++i) {
    Rng sub = rng.fork(i);
    double a = raw_advantage(oracle, states.row(Eigen::Index(i)).transpose(),
                             dataset.transitions[i].action, sub);
    if (a > 0.0) {
      pos_sum += a;
      pos_n += 1;
    } else if (a < 0.0) {
      neg_sum += a;
      neg_n += 1;
    }
  }
  out.count = count;
  out.positive_fraction = double(pos_n) / double(count);
  out.mean_positive = pos_n ? pos_sum / double(pos_n) : 0.0;
  out.mean_negative = neg_n ? neg_sum / double(neg_n) : 0.0;
  return out;
}

}  // namespace adac
