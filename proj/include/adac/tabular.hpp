#pragma once

#include <Eigen/Dense>
#include <string>

#include "adac/rng.hpp"

namespace adac {

// Finite MDP for the verification lab. Transition row (s * action_count + a)
// is a distribution over next states; behavior holds the data policy
// probabilities with zeros marking unsupported actions.
struct TabularMdp {
  int state_count = 0;
  int action_count = 0;
  Eigen::MatrixXd transition;  // (S*A) x S
  Eigen::MatrixXd reward;      // S x A, |r| <= r_max
  Eigen::MatrixXd behavior;    // S x A
  double gamma = 0.99;
  double r_max = 1.0;

  int row(int s, int a) const { return s * action_count + a; }
  void validate() const;
};

// Rewards uniform in [-r_max, r_max]; behavior support samples
// ceil(coverage * action_count) actions per state with random weights.
TabularMdp make_random_mdp(int state_count, int action_count, double behavior_coverage,
                           bool deterministic, Rng& rng, double gamma = 0.99,
                           double r_max = 1.0);

// JSON dump for replaying failing certification trials.
std::string mdp_to_json(const TabularMdp& mdp);

}  // namespace adac
