#include "melohist/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace melohist {

namespace {

void require_same_length(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

// One frame's cross-entropy; the logit gradient is written into row t.
double frame_histogram_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double weight,
                            Eigen::MatrixXd& grad, Eigen::Index t) {
  const double p_sum = p.sum();
  double value = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    value -= p[k] * std::log(q[k] + kLogEps);
  }
  grad.row(t) = weight * (q.transpose() * p_sum - p.transpose());
  return weight * value;
}

}  // namespace

LossValue histogram_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  require_same_length(p.size(), q.size(), "histogram_loss");
  LossValue out;
  out.grad.resize(1, p.size());
  out.value = frame_histogram_loss(p, q, 1.0, out.grad, 0);
  return out;
}

LossValue histogram_loss_batch(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                               const std::vector<std::uint8_t>* mask) {
  require_same_length(p.rows(), q.rows(), "histogram_loss_batch rows");
  require_same_length(p.cols(), q.cols(), "histogram_loss_batch cols");
  if (mask && static_cast<Eigen::Index>(mask->size()) != p.rows()) {
    throw std::invalid_argument("histogram_loss_batch: mask length mismatch");
  }
  LossValue out;
  out.grad = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    if (mask && !(*mask)[t]) continue;
    out.value += frame_histogram_loss(p.row(t), q.row(t), 1.0, out.grad, t);
  }
  return out;
}

LossValue weighted_histogram_loss(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                                  const std::vector<std::uint8_t>& voiced,
                                  const ClassWeights& weights) {
  require_same_length(p.rows(), q.rows(), "weighted_histogram_loss rows");
  require_same_length(p.cols(), q.cols(), "weighted_histogram_loss cols");
  require_same_length(static_cast<Eigen::Index>(voiced.size()), p.rows(),
                      "weighted_histogram_loss flags");
  LossValue out;
  out.grad.resize(p.rows(), p.cols());
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    const double w = weights.of(voiced[t] != 0);
    out.value += frame_histogram_loss(p.row(t), q.row(t), w, out.grad, t);
  }
  return out;
}

LossValue weighted_bce(const std::vector<std::uint8_t>& voiced, const Eigen::VectorXd& vprob,
                       const ClassWeights& weights) {
  require_same_length(static_cast<Eigen::Index>(voiced.size()), vprob.size(), "weighted_bce");
  LossValue out;
  out.grad.resize(vprob.size(), 1);
  for (Eigen::Index t = 0; t < vprob.size(); ++t) {
    const double v = voiced[t] ? 1.0 : 0.0;
    const double q = std::clamp(vprob[t], kLogEps, 1.0 - kLogEps);
    const double w = weights.of(voiced[t] != 0);
    out.value -= w * (v * std::log(q) + (1.0 - v) * std::log(1.0 - q));
    out.grad(t, 0) = w * (q - v);
  }
  return out;
}

CombinedLoss bayes_loss(const LossValue& bce, const LossValue& hl_voiced, double lambda) {
  CombinedLoss out;
  out.bce_value = bce.value;
  out.pitch_value = hl_voiced.value;
  out.value = bce.value + lambda * hl_voiced.value;
  out.voicing_grad = bce.grad;
  out.pitch_grad = lambda * hl_voiced.grad;
  return out;
}

GaussianNllLoss gaussian_nll_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& mu_hat,
                                  const Eigen::VectorXd& s_hat) {
  require_same_length(y.size(), mu_hat.size(), "gaussian_nll_loss mu");
  require_same_length(y.size(), s_hat.size(), "gaussian_nll_loss s");
  const double n = static_cast<double>(y.size());
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  GaussianNllLoss out;
  out.grad_mean.resize(y.size());
  out.grad_logvar.resize(y.size());
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    const double diff = y[t] - mu_hat[t];
    const double inv_var = std::exp(-s_hat[t]);
    out.value += 0.5 * s_hat[t] + 0.5 * diff * diff * inv_var + kHalfLog2Pi;
    out.grad_mean[t] = -diff * inv_var / n;
    out.grad_logvar[t] = 0.5 * (1.0 - diff * diff * inv_var) / n;
  }
  out.value /= n;
  return out;
}

LossValue mse_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  require_same_length(y.size(), y_hat.size(), "mse_loss");
  const double n = static_cast<double>(y.size());
  LossValue out;
  out.grad.resize(y.size(), 1);
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    const double diff = y_hat[t] - y[t];
    out.value += diff * diff / n;
    out.grad(t, 0) = 2.0 * diff / n;
  }
  return out;
}

}  // namespace melohist
