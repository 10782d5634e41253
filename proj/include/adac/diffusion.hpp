#pragma once

#include <Eigen/Dense>

namespace adac {

struct DiffusionSchedule {
  int step_count = 0;            // T
  Eigen::VectorXd betas;         // index 0 is timestep 1
  Eigen::VectorXd alphas;        // 1 - beta
  Eigen::VectorXd alpha_bars;    // running product, strictly decreasing

  void validate() const;
};

// Variance-preserving schedule:
// beta_i = 1 - exp(-beta_min/T - (2i-1)(beta_max-beta_min)/(2T^2)),
// (beta_min, beta_max) = (0.1, 10.0).
DiffusionSchedule make_vp_schedule(int step_count);

// Sinusoidal timestep embedding table, row i-1 for timestep i.
Eigen::MatrixXd timestep_embedding(int step_count, int dim);

}  // namespace adac
