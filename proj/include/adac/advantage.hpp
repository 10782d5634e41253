#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adac/dataset.hpp"
#include "adac/pretrain.hpp"

namespace adac {

struct AdvantageConfig {
  double kappa = 0.65;
  int sample_count = 25;  // N behavior draws per threshold
  double lambda_pos = 6.0;
  double lambda_neg = 4.0;

  void validate() const;
  // The recommended pairing keeps lambda_pos at about 1.5x lambda_neg; an
  // inverted pair is legal but worth flagging.
  bool ratio_warning() const { return lambda_pos < lambda_neg; }
};

// Frozen pretrained models bundled for advantage queries. All states passed
// to the query functions must already be in the models' (normalized) space;
// the dataset-aware helpers below normalize internally.
struct AdvantageOracle {
  ValueModel value;
  TransitionModel dynamics;
  BehaviorModel behavior;
  AdvantageConfig config;
  // threshold per dataset transition index (that transition's next state).
  std::optional<std::vector<double>> threshold_cache;
};

// Linear-interpolation sample quantile at continuous rank kappa*(n-1).
double quantile(const VectorXd& values, double kappa);

// lambda_pos*tanh(x/lambda_pos) for x >= 0, lambda_neg*tanh(x/lambda_neg)
// for x < 0. Continuous with unit slope at the origin.
double softclip(double x, double lambda_pos, double lambda_neg);

// V(P(state, action)), evaluated as single-row forwards so the result does
// not depend on what else sits in a batch.
double next_state_value(const AdvantageOracle& oracle, const VectorXd& state,
                        const VectorXd& action);

// Quantile of next-state values over caller-supplied action rows.
double threshold_from_actions(const AdvantageOracle& oracle, const VectorXd& state,
                              const MatrixXd& actions);

// Draws N actions from the behavior model at this state and returns the
// kappa-quantile of their predicted next-state values.
double threshold(const AdvantageOracle& oracle, const VectorXd& state, Rng& rng);

// Raw Eq. 9 advantage: V(P(s,a)) minus the sampled threshold.
double raw_advantage(const AdvantageOracle& oracle, const VectorXd& state,
                     const VectorXd& action, Rng& rng);
double modulated_advantage(const AdvantageOracle& oracle, const VectorXd& state,
                           const VectorXd& action, Rng& rng);

// Cache-backed variants addressed by dataset transition index; they throw if
// precompute_thresholds has not run. The state argument must be that
// transition's (normalized) next state.
double cached_threshold(const AdvantageOracle& oracle, std::uint64_t index);
double raw_advantage_cached(const AdvantageOracle& oracle, std::uint64_t index,
                            const VectorXd& state, const VectorXd& action);
double modulated_advantage_cached(const AdvantageOracle& oracle, std::uint64_t index,
                                  const VectorXd& state, const VectorXd& action);

// Fills oracle.threshold_cache with one threshold per transition, computed at
// the transition's normalized next state under the deterministic substream
// rng.fork(index). The rng itself is never advanced, so a later fork with the
// same index reproduces any entry exactly.
void precompute_thresholds(AdvantageOracle& oracle, const OfflineDataset& dataset,
                           Rng& rng);

// Raw-advantage statistics of the dataset's own (state, action) pairs, the
// local analogue of the paper's per-task advantage table.
struct AdvantageStats {
  double mean_positive = 0.0;  // mean over strictly positive advantages
  double mean_negative = 0.0;  // mean over strictly negative advantages
  double positive_fraction = 0.0;
  std::uint64_t count = 0;
};

AdvantageStats advantage_stats(const AdvantageOracle& oracle, const OfflineDataset& dataset,
                               Rng& rng);

}  // namespace adac
