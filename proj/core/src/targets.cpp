#include "melohist/targets.hpp"

#include <cmath>
#include <stdexcept>

namespace melohist {

double gaussian_cdf(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) {
    throw std::domain_error("gaussian_cdf requires sigma > 0");
  }
  // erfc keeps the lower tail accurate where 1 - erf would cancel.
  const double z = (x - mu) / sigma;
  return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

Eigen::VectorXd bin_weights(const BinGrid& grid, double mu, double sigma) {
  if (!(sigma > 0.0)) {
    throw std::domain_error("bin_weights requires sigma > 0");
  }
  const int k_count = grid.num_bins;
  Eigen::VectorXd cdf(k_count + 1);
  for (int k = 0; k <= k_count; ++k) {
    cdf[k] = gaussian_cdf(grid.a + k * grid.bin_width, mu, sigma);
  }
  Eigen::VectorXd p(k_count);
  for (int k = 0; k < k_count; ++k) {
    p[k] = cdf[k + 1] - cdf[k];
  }
  return p;
}

TargetWeights fixed_sigma_targets(const BinGrid& grid, double encoded) {
  TargetWeights t;
  t.mu = encoded;
  t.sigma = grid.bin_width;
  t.p = bin_weights(grid, t.mu, t.sigma);
  return t;
}

double dynamic_sigma(double y, double y_hat, double floor) {
  if (!(floor > 0.0)) {
    throw std::invalid_argument("dynamic_sigma floor must be positive");
  }
  return std::max(std::fabs(y - y_hat), floor);
}

ClassWeights class_weights(std::span<const FrameLabel> labels, bool invert) {
  if (labels.empty()) {
    throw std::invalid_argument("class_weights needs at least one frame");
  }
  std::size_t voiced = 0;
  for (const FrameLabel& label : labels) {
    if (label.voiced()) ++voiced;
  }
  ClassWeights w;
  w.voiced = static_cast<double>(voiced) / static_cast<double>(labels.size());
  w.unvoiced = 1.0 - w.voiced;
  if (invert) std::swap(w.voiced, w.unvoiced);
  return w;
}

}  // namespace melohist
