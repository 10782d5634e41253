#include "adac/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace adac {

void DiffusionSchedule::validate() const {
  if (step_count < 1 || betas.size() != step_count || alphas.size() != step_count ||
      alpha_bars.size() != step_count)
    throw std::invalid_argument("diffusion schedule arrays must have length T >= 1");
  double prev_bar = 1.0;
  for (int i = 0; i < step_count; ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0))
      throw std::invalid_argument("beta out of (0,1)");
    if (std::abs(alphas[i] - (1.0 - betas[i])) > 1e-15)
      throw std::invalid_argument("alpha != 1 - beta");
    if (!(alpha_bars[i] > 0.0 && alpha_bars[i] < 1.0))
      throw std::invalid_argument("alpha_bar out of (0,1)");
    if (!(alpha_bars[i] < prev_bar))
      throw std::invalid_argument("alpha_bars must strictly decrease");
    double expect = (i == 0 ? alphas[0] : alphas[i] * alpha_bars[i - 1]);
    if (std::abs(alpha_bars[i] - expect) > 1e-12)
      throw std::invalid_argument("alpha_bar product inconsistency");
    prev_bar = alpha_bars[i];
  }
}

DiffusionSchedule make_vp_schedule(int step_count) {
  if (step_count < 1) throw std::invalid_argument("make_vp_schedule: T >= 1 required");
  const double beta_min = 0.1, beta_max = 10.0;
  DiffusionSchedule s;
  s.step_count = step_count;
  s.betas.resize(step_count);
  s.alphas.resize(step_count);
  s.alpha_bars.resize(step_count);
  double t = static_cast<double>(step_count);
  double bar = 1.0;
  for (int i = 1; i <= step_count; ++i) {
    double expo = -beta_min / t - (2.0 * i - 1.0) * (beta_max - beta_min) / (2.0 * t * t);
    double beta = 1.0 - std::exp(expo);
    s.betas[i - 1] = beta;
    s.alphas[i - 1] = 1.0 - beta;
    bar *= s.alphas[i - 1];
    s.alpha_bars[i - 1] = bar;
  }
  s.validate();
  return s;
}

Eigen::MatrixXd timestep_embedding(int step_count, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("timestep embedding dim must be even and >= 2");
  Eigen::MatrixXd table(step_count, dim);
  int half = dim / 2;
  for (int i = 1; i <= step_count; ++i)
    for (int k = 0; k < half; ++k) {
      double freq = std::pow(10000.0, -static_cast<double>(k) / half);
      table(i - 1, 2 * k) = std::sin(i * freq);
      table(i - 1, 2 * k + 1) = std::cos(i * freq);
    }
  return table;
}

}  // namespace adac
