#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "melohist/targets.hpp"

namespace melohist {

// Added inside every log; softmax outputs can underflow.
inline constexpr double kLogEps = 1e-12;

// A loss together with its analytic gradient with respect to the pre-softmax
// (or pre-sigmoid) logits that produced the probabilities. Shapes follow the
// inputs: 1xK for single-frame calls, TxK for batches, Tx1 for scalar heads.
struct LossValue {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

// Cross-entropy between target bin weights p and a predicted histogram q
// (one frame). Gradient w.r.t. logits z with q = softmax(z) is q*sum(p) - p.
LossValue histogram_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// Batched histogram loss, summed over frames. Rows where mask is 0 contribute
// nothing, value or gradient; pass nullptr to include every row.
LossValue histogram_loss_batch(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                               const std::vector<std::uint8_t>* mask = nullptr);

// Class-weighted histogram loss summed over a batch of frames.
LossValue weighted_histogram_loss(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                                  const std::vector<std::uint8_t>& voiced,
                                  const ClassWeights& weights);

// Class-weighted binary cross-entropy on voicing probabilities, summed over
// frames. Probabilities are clamped to [kLogEps, 1-kLogEps]; the gradient is
// w.r.t. the pre-sigmoid logit: w * (q - v).
LossValue weighted_bce(const std::vector<std::uint8_t>& voiced, const Eigen::VectorXd& vprob,
                       const ClassWeights& weights);

// Voicing BCE plus lambda times the voiced-frame histogram loss; the two
// heads keep separate gradients with no cross-head leakage.
struct CombinedLoss {
  double value = 0.0;
  double bce_value = 0.0;
  double pitch_value = 0.0;
  Eigen::MatrixXd voicing_grad;  // Tx1
  Eigen::MatrixXd pitch_grad;    // TxK, already scaled by lambda
};
CombinedLoss bayes_loss(const LossValue& bce, const LossValue& hl_voiced, double lambda);

// Gaussian negative log-likelihood with a log-variance head, averaged over
// frames: mean of 0.5*s + (y-mu)^2 / (2*exp(s)) + 0.5*log(2*pi).
struct GaussianNllLoss {
  double value = 0.0;
  Eigen::VectorXd grad_mean;
  Eigen::VectorXd grad_logvar;
};
GaussianNllLoss gaussian_nll_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& mu_hat,
                                  const Eigen::VectorXd& s_hat);

// Mean squared error over frames; grad column is 2*(y_hat - y)/N.
LossValue mse_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);

}  // namespace melohist
