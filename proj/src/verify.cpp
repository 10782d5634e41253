#include "adac/verify.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

namespace adac {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double exact_expectile(const VectorXd& values, const VectorXd& probs, double tau) {
  if (values.size() == 0 || values.size() != probs.size())
    throw std::invalid_argument("exact_expectile: empty input or size mismatch");
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("exact_expectile: tau outside (0,1)");
  if (!probs.allFinite() || (probs.array() < 0.0).any() ||
      std::abs(probs.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("exact_expectile: probs is not a distribution");
  if (!values.allFinite())
    throw std::invalid_argument("exact_expectile: non-finite values");

  double lo = values.minCoeff();
  double hi = values.maxCoeff();
  // g is strictly decreasing with g(lo) >= 0 >= g(hi), so plain bisection
  // works with no case analysis. 200 halvings exhaust double precision.
  for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
    double mid = 0.5 * (lo + hi);
    double g = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      double u = values(i) - mid;
      g += probs(i) * (u < 0.0 ? 1.0 - tau : tau) * u;
    }
    (g > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

VectorXd expectile_bellman(const TabularMdp& mdp, const VectorXd& v, double tau) {
  if (v.size() != mdp.state_count)
    throw std::invalid_argument("expectile_bellman: value table size mismatch");
  VectorXd out(mdp.state_count);
  std::vector<double> atoms, weights;
  atoms.reserve(size_t(mdp.action_count) * mdp.state_count);
  weights.reserve(atoms.capacity());
  for (int s = 0; s < mdp.state_count; ++s) {
    atoms.clear();
    weights.clear();
    for (int a = 0; a < mdp.action_count; ++a) {
      double bp = mdp.behavior(s, a);
      if (bp <= 0.0) continue;
      for (int s2 = 0; s2 < mdp.state_count; ++s2) {
        double tp = mdp.transition(mdp.row(s, a), s2);
        if (tp <= 0.0) continue;
        atoms.push_back(mdp.reward(s, a) + mdp.gamma * v(s2));
        weights.push_back(bp * tp);
      }
    }
    out(s) = exact_expectile(
        Eigen::Map<const VectorXd>(atoms.data(), Eigen::Index(atoms.size())),
        Eigen::Map<const VectorXd>(weights.data(), Eigen::Index(weights.size())), tau);
  }
  return out;
}

VectorXd fixed_point_v_tau(const TabularMdp& mdp, double tau, long* sweep_count) {
  VectorXd v = VectorXd::Zero(mdp.state_count);
  for (long it = 1; it <= 1000000; ++it) {
    VectorXd next = expectile_bellman(mdp, v, tau);
    double delta = (next - v).lpNorm<Eigen::Infinity>();
    v = std::move(next);
    if (delta < 1e-10) {
      if (sweep_count) *sweep_count = it;
      return v;
    }
  }
  throw std::runtime_error("fixed_point_v_tau: no convergence within 1e6 sweeps");
}

namespace {

VectorXd value_iteration(const TabularMdp& mdp, bool support_only) {
  VectorXd v = VectorXd::Zero(mdp.state_count);
  for (long it = 1; it <= 1000000; ++it) {
    VectorXd next(mdp.state_count);
    for (int s = 0; s < mdp.state_count; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.action_count; ++a) {
        if (support_only && mdp.behavior(s, a) <= 0.0) continue;
        double q = mdp.reward(s, a) + mdp.gamma * mdp.transition.row(mdp.row(s, a)).dot(v);
        best = std::max(best, q);
      }
      next(s) = best;
    }
    double delta = (next - v).lpNorm<Eigen::Infinity>();
    v = std::move(next);
    if (delta < 1e-10) return v;
  }
  throw std::runtime_error("value_iteration: no convergence within 1e6 sweeps");
}

}  // namespace

VectorXd dataset_optimal_v(const TabularMdp& mdp) { return value_iteration(mdp, true); }

VectorXd optimal_v(const TabularMdp& mdp) { return value_iteration(mdp, false); }

MatrixXd tabular_advantage(const TabularMdp& mdp, const VectorXd& v, double kappa) {
  if (v.size() != mdp.state_count)
    throw std::invalid_argument("tabular_advantage: value table size mismatch");
  if (!(kappa > 0.0 && kappa < 1.0))
    throw std::invalid_argument("tabular_advantage: kappa outside (0,1)");
  MatrixXd ev(mdp.state_count, mdp.action_count);
  for (int s = 0; s < mdp.state_count; ++s)
    for (int a = 0; a < mdp.action_count; ++a)
      ev(s, a) = mdp.transition.row(mdp.row(s, a)).dot(v);

  MatrixXd adv(mdp.state_count, mdp.action_count);
  std::vector<std::pair<double, double>> supported;  // (value, behavior prob)
  for (int s = 0; s < mdp.state_count; ++s) {
    supported.clear();
    for (int a = 0; a < mdp.action_count; ++a)
      if (mdp.behavior(s, a) > 0.0) supported.emplace_back(ev(s, a), mdp.behavior(s, a));
    std::sort(supported.begin(), supported.end());
    double cum = 0.0;
    double quant = supported.back().first;
    for (const auto& [value, prob] : supported) {
      cum += prob;
      if (cum >= kappa - 1e-15) {
        quant = value;
        break;
      }
    }
    for (int a = 0; a < mdp.action_count; ++a) adv(s, a) = ev(s, a) - quant;
  }
  return adv;
}

MatrixXd advantage_bellman_apply(const TabularMdp& mdp, const MatrixXd& q,
                                 const MatrixXd& policy, const MatrixXd& advantage,
                                 double lambda) {
  auto shaped = [&](const MatrixXd& m) {
    return m.rows() == mdp.state_count && m.cols() == mdp.action_count;
  };
  if (!shaped(q) || !shaped(policy) || !shaped(advantage))
    throw std::invalid_argument("advantage_bellman_apply: table shape mismatch");
  for (int s = 0; s < mdp.state_count; ++s) {
    if ((policy.row(s).array() < 0.0).any() || std::abs(policy.row(s).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("advantage_bellman_apply: policy row is not a distribution");
  }
  VectorXd mixed(mdp.state_count);
  for (int s = 0; s < mdp.state_count; ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp.action_count; ++a)
      acc += policy(s, a) * (q(s, a) + lambda * advantage(s, a));
    mixed(s) = acc;
  }
  MatrixXd out(mdp.state_count, mdp.action_count);
  for (int s = 0; s < mdp.state_count; ++s)
    for (int a = 0; a < mdp.action_count; ++a)
      out(s, a) = mdp.reward(s, a) + mdp.gamma * mdp.transition.row(mdp.row(s, a)).dot(mixed);
  return out;
}

namespace {

// Exhaustive semi-gradient expectile regression on the tabular one-hot model.
// Full-batch Adam with the rate decayed linearly to zero; a fixed rate orbits
// the minimizer instead of settling onto it.
VectorXd expectile_regression_v(const TabularMdp& mdp, double tau) {
  const int S = mdp.state_count;
  VectorXd theta = VectorXd::Zero(S);
  VectorXd m = VectorXd::Zero(S), v = VectorXd::Zero(S);
  const int iters = 6000;
  const double lr0 = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int it = 1; it <= iters; ++it) {
    VectorXd g = VectorXd::Zero(S);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < mdp.action_count; ++a) {
        double bp = mdp.behavior(s, a);
        if (bp <= 0.0) continue;
        for (int s2 = 0; s2 < S; ++s2) {
          double tp = mdp.transition(mdp.row(s, a), s2);
          if (tp <= 0.0) continue;
          double u = mdp.reward(s, a) + mdp.gamma * theta(s2) - theta(s);
          double w = u < 0.0 ? 1.0 - tau : tau;
          g(s) -= 2.0 * bp * tp * w * u;
        }
      }
    }
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g).eval();
    double lr = lr0 * (1.0 - double(it - 1) / iters);
    double c1 = 1.0 - std::pow(b1, it);
    double c2 = 1.0 - std::pow(b2, it);
    theta -= lr * ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
  }
  return theta;
}

MatrixXd advantage_fixed_point(const TabularMdp& mdp, const MatrixXd& policy,
                               const MatrixXd& advantage, double lambda) {
  MatrixXd q = MatrixXd::Zero(mdp.state_count, mdp.action_count);
  for (long it = 1; it <= 1000000; ++it) {
    MatrixXd next = advantage_bellman_apply(mdp, q, policy, advantage, lambda);
    double delta = (next - q).lpNorm<Eigen::Infinity>();
    q = std::move(next);
    if (delta < 1e-12) return q;
  }
  throw std::runtime_error("advantage_fixed_point: no convergence within 1e6 sweeps");
}

struct Recorder {
  PropositionCheck* check;
  void operator()(double margin, const TabularMdp& mdp, const std::string& detail) {
    check->trial_count += 1;
    check->worst_margin = std::max(check->worst_margin, margin);
    if (margin > 0.0) {
      check->failure_count += 1;
      if (check->failing_mdp_json.empty()) {
        check->failing_detail = detail;
        check->failing_mdp_json = mdp_to_json(mdp);
      }
    }
  }
};

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

bool Certificate::all_passed() const {
  for (const auto& c : checks)
    if (!c.diagnostic && !c.passed()) return false;
  return true;
}

const PropositionCheck* Certificate::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::string Certificate::to_json() const {
  nlohmann::json j;
  j["trial_count"] = trial_count;
  j["all_passed"] = all_passed();
  auto arr = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json jc;
    jc["name"] = c.name;
    jc["requirement"] = c.requirement;
    jc["diagnostic"] = c.diagnostic;
    jc["trials"] = c.trial_count;
    jc["failures"] = c.failure_count;
    jc["passed"] = c.passed();
    if (std::isfinite(c.worst_margin))
      jc["worst_margin"] = c.worst_margin;
    else
      jc["worst_margin"] = nullptr;
    if (!c.failing_mdp_json.empty()) {
      jc["failing_detail"] = c.failing_detail;
      jc["failing_mdp"] = nlohmann::json::parse(c.failing_mdp_json);
    }
    arr.push_back(std::move(jc));
  }
  j["checks"] = std::move(arr);
  return j.dump(2);
}

std::string Certificate::table() const {
  std::string out;
  for (const auto& c : checks) {
    std::string margin = std::isfinite(c.worst_margin) ? format_double(c.worst_margin) : "n/a";
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-28s trials=%-4d failures=%-4d worst_margin=%s%s\n",
                  c.passed() ? "PASS" : "FAIL", c.name.c_str(), c.trial_count,
                  c.failure_count, margin.c_str(), c.diagnostic ? "  [diagnostic]" : "");
    out += line;
  }
  return out;
}

Certificate certify_propositions(int trial_count, Rng& rng) {
  if (trial_count < 0) throw std::invalid_argument("certify_propositions: negative trial count");
  Certificate cert;
  cert.trial_count = trial_count;
  auto add = [&cert](const char* name, const char* requirement, bool diagnostic = false) {
    PropositionCheck c;
    c.name = name;
    c.requirement = requirement;
    c.diagnostic = diagnostic;
    cert.checks.push_back(std::move(c));
    return cert.checks.size() - 1;
  };
  // Indices into cert.checks; the vector is fully built before any recording.
  size_t i_p1 = add("p1_expectile_regression",
                    "semi-gradient expectile regression matches the exact fixed point within 1e-3");
  size_t i_p2a = add("p2a_monotone_in_tau",
                     "fixed-point values are non-decreasing in tau over {0.5..0.99}");
  size_t i_p2b = add("p2b_deterministic_limit",
                     "deterministic dynamics: ||V_0.999 - dataset-optimal||_inf <= 1e-2");
  size_t i_p2d = add("p2b_deterministic_refined",
                     "deterministic dynamics at tau=0.99999, same 1e-2 bound", true);
  size_t i_p2s = add("p2b_stochastic_one_sided",
                     "stochastic dynamics: V_0.999 >= dataset-optimal - 1e-9 per state");
  size_t i_p3 = add("p3_contraction",
                    "||T_A Q1 - T_A Q2||_inf <= gamma ||Q1 - Q2||_inf on 100 random pairs");
  size_t i_p4 = add("p4_fixed_point_gap",
                    "||Q_A - Q||_inf <= 2 lambda R_max / (1-gamma)^2");
  size_t i_p4z = add("p4_lambda_zero",
                     "lambda=0 reproduces the standard fixed point exactly");

  const double gammas[] = {0.8, 0.9, 0.95};
  const double p1_taus[] = {0.6, 0.75, 0.9};
  const double kappas[] = {0.55, 0.65, 0.75, 0.85, 0.95};

  for (int trial = 0; trial < trial_count; ++trial) {
    int S = 2 + int(rng.below(9));
    int A = 2 + int(rng.below(3));
    double gamma = gammas[rng.below(3)];
    double coverage = rng.uniform(0.25, 1.0);
    bool deterministic = rng.uniform() < 0.5;
    TabularMdp mdp = make_random_mdp(S, A, coverage, deterministic, rng, gamma);

    double tau1 = p1_taus[rng.below(3)];
    VectorXd fp1 = fixed_point_v_tau(mdp, tau1);
    VectorXd theta = expectile_regression_v(mdp, tau1);
    Recorder{&cert.checks[i_p1]}((theta - fp1).lpNorm<Eigen::Infinity>() - 1e-3, mdp,
                                 "tau=" + format_double(tau1));

    const double tau_grid[] = {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99};
    VectorXd prev = fixed_point_v_tau(mdp, tau_grid[0]);
    double worst_drop = -std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < std::size(tau_grid); ++i) {
      VectorXd cur = fixed_point_v_tau(mdp, tau_grid[i]);
      worst_drop = std::max(worst_drop, (prev - cur).maxCoeff());
      prev = std::move(cur);
    }
    Recorder{&cert.checks[i_p2a]}(worst_drop - 1e-9, mdp, "grid 0.5..0.99");

    VectorXd v999 = fixed_point_v_tau(mdp, 0.999);
    VectorXd vd = dataset_optimal_v(mdp);
    if (deterministic) {
      double gap = (v999 - vd).lpNorm<Eigen::Infinity>();
      Recorder{&cert.checks[i_p2b]}(gap - 1e-2, mdp, "gap=" + format_double(gap));
      VectorXd v5 = fixed_point_v_tau(mdp, 0.99999);
      double gap5 = (v5 - vd).lpNorm<Eigen::Infinity>();
      Recorder{&cert.checks[i_p2d]}(gap5 - 1e-2, mdp, "gap=" + format_double(gap5));
    } else {
      double shortfall = (vd - v999).maxCoeff();
      Recorder{&cert.checks[i_p2s]}(shortfall - 1e-9, mdp,
                                    "shortfall=" + format_double(shortfall));
    }

    MatrixXd policy(S, A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) policy(s, a) = 0.05 + rng.uniform();
      policy.row(s) /= policy.row(s).sum();
    }
    double kappa = kappas[rng.below(5)];
    MatrixXd adv = tabular_advantage(mdp, v999, kappa);

    double worst_excess = -std::numeric_limits<double>::infinity();
    for (int pair = 0; pair < 100; ++pair) {
      MatrixXd q1(S, A), q2(S, A);
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          q1(s, a) = rng.uniform(-10.0, 10.0);
          q2(s, a) = rng.uniform(-10.0, 10.0);
        }
      double lam3 = rng.uniform();
      MatrixXd t1 = advantage_bellman_apply(mdp, q1, policy, adv, lam3);
      MatrixXd t2 = advantage_bellman_apply(mdp, q2, policy, adv, lam3);
      double lhs = (t1 - t2).lpNorm<Eigen::Infinity>();
      double rhs = gamma * (q1 - q2).lpNorm<Eigen::Infinity>();
      worst_excess = std::max(worst_excess, lhs - rhs - 1e-12 * (1.0 + rhs));
    }
    Recorder{&cert.checks[i_p3]}(worst_excess, mdp, "kappa=" + format_double(kappa));

    double lambda = rng.uniform(0.2, 1.0);
    MatrixXd qa = advantage_fixed_point(mdp, policy, adv, lambda);
    MatrixXd q0 = advantage_fixed_point(mdp, policy, adv, 0.0);
    double gap = (qa - q0).lpNorm<Eigen::Infinity>();
    double bound = 2.0 * lambda * mdp.r_max / ((1.0 - gamma) * (1.0 - gamma));
    Recorder{&cert.checks[i_p4]}(gap - bound, mdp, "lambda=" + format_double(lambda) +
                                                       " gap=" + format_double(gap));

    MatrixXd q0_blank =
        advantage_fixed_point(mdp, policy, MatrixXd::Zero(S, A), 0.0);
    Recorder{&cert.checks[i_p4z]}((q0 - q0_blank).lpNorm<Eigen::Infinity>(), mdp, "lambda=0");
  }
  return cert;
}

}  // namespace adac
