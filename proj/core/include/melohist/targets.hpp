#pragma once

#include <Eigen/Core>
#include <span>

#include "melohist/pitch_grid.hpp"

namespace melohist {

// Per-frame target distribution discretized onto a grid: p[k] is the Gaussian
// mass falling in bin k+1. The out-of-support tails are dropped, not
// renormalized, so p.sum() <= 1.
struct TargetWeights {
  Eigen::VectorXd p;
  double mu = 0.0;
  double sigma = 0.0;
};

// Frame class weights as used by the weighted losses: voiced frames weigh
// voiced_fraction, unvoiced frames 1 - voiced_fraction.
struct ClassWeights {
  double voiced = 0.5;
  double unvoiced = 0.5;
  double of(bool is_voiced) const { return is_voiced ? voiced : unvoiced; }
};

// Normal CDF with mean mu and standard deviation sigma; throws
// std::domain_error unless sigma > 0.
double gaussian_cdf(double x, double mu, double sigma);

// CDF differences over the grid bins: p_k = F(l_k + b_w) - F(l_k).
Eigen::VectorXd bin_weights(const BinGrid& grid, double mu, double sigma);

// Targets with the standard deviation fixed to the bin width; precomputable
// offline, independent of model state.
TargetWeights fixed_sigma_targets(const BinGrid& grid, double encoded);

// Error-tracking standard deviation: max(|y - y_hat|, floor). The result is a
// constant with respect to model parameters (stop gradient): losses built on
// it must not differentiate through y_hat.
double dynamic_sigma(double y, double y_hat, double floor);

// Voiced/unvoiced weights over a training set; invert swaps the two, giving
// conventional inverse-frequency balancing.
ClassWeights class_weights(std::span<const FrameLabel> labels, bool invert = false);

}  // namespace melohist
