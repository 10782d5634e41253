#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "adac/rng.hpp"
#include "adac/tabular.hpp"

namespace adac {

// Exact tau-expectile of a finite weighted distribution: the unique root of
// g(y) = sum_i p_i |tau - 1(x_i < y)| (x_i - y), located by bisection on
// [min x, max x] to absolute tolerance 1e-12.
double exact_expectile(const Eigen::VectorXd& values, const Eigen::VectorXd& probs,
                       double tau);

// One sweep of the tau-expectile Bellman operator. Per state the operator takes
// the exact tau-expectile of the joint atoms r(s,a) + gamma*v(s') weighted by
// behavior(a|s) * transition(s'|s,a).
Eigen::VectorXd expectile_bellman(const TabularMdp& mdp, const Eigen::VectorXd& v,
                                  double tau);

// Fixed point of expectile_bellman, iterated from zeros until the sup-norm
// change drops below 1e-10. Throws if 1e6 sweeps are not enough. Optionally
// reports how many sweeps were used.
Eigen::VectorXd fixed_point_v_tau(const TabularMdp& mdp, double tau,
                                  long* sweep_count = nullptr);

// Batch-optimal values: value iteration where the max ranges only over actions
// with behavior support, to tolerance 1e-10.
Eigen::VectorXd dataset_optimal_v(const TabularMdp& mdp);

// Classic optimal values with the max over every action, same tolerance. With
// full behavior coverage dataset_optimal_v collapses to this.
Eigen::VectorXd optimal_v(const TabularMdp& mdp);

// Tabular advantage built from a value table: A(s,a) = E_{s'}[v] minus the
// kappa-quantile of the supported behavior actions' E_{s'}[v], where the
// quantile is the weighted inverse CDF (the exact enumeration limit of
// sampling actions from the behavior policy).
Eigen::MatrixXd tabular_advantage(const TabularMdp& mdp, const Eigen::VectorXd& v,
                                  double kappa);

// One exact application of the advantage-based Bellman operator:
// out(s,a) = r(s,a) + gamma * E_{s'}[ E_{a'~policy}[ q(s',a') + lambda*advantage(s',a') ] ].
Eigen::MatrixXd advantage_bellman_apply(const TabularMdp& mdp, const Eigen::MatrixXd& q,
                                        const Eigen::MatrixXd& policy,
                                        const Eigen::MatrixXd& advantage, double lambda);

struct PropositionCheck {
  std::string name;
  std::string requirement;
  bool diagnostic = false;  // informational row, excluded from all_passed()
  int trial_count = 0;
  int failure_count = 0;
  // Worst observed (measured - allowed); any value above zero is a failure.
  double worst_margin = -std::numeric_limits<double>::infinity();
  std::string failing_detail;    // parameters of the first failing trial
  std::string failing_mdp_json;  // first failing MDP, serialized for replay

  bool passed() const { return failure_count == 0; }
};

struct Certificate {
  int trial_count = 0;
  std::vector<PropositionCheck> checks;

  bool all_passed() const;
  const PropositionCheck* find(const std::string& name) const;
  std::string to_json() const;
  std::string table() const;
};

// Random-MDP certification of Propositions 1-4. Draws trial_count MDPs with
// 2..10 states, 2..4 actions, gamma in {0.8, 0.9, 0.95}, alternating between
// deterministic and stochastic dynamics by coin flip.
Certificate certify_propositions(int trial_count, Rng& rng);

}  // namespace adac
