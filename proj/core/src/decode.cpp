#include "melohist/decode.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace melohist {

double expectation(const Eigen::VectorXd& q, const BinGrid& grid) {
  if (q.size() != grid.num_bins) {
    throw std::invalid_argument("expectation: histogram size does not match grid");
  }
  double sum = 0.0;
  for (int k = 0; k < grid.num_bins; ++k) {
    sum += q[k] * grid.center(k + 1);
  }
  return sum;
}

double std_dev(const Eigen::VectorXd& q, const BinGrid& grid, double y_hat) {
  if (q.size() != grid.num_bins) {
    throw std::invalid_argument("std_dev: histogram size does not match grid");
  }
  double sum = 0.0;
  for (int k = 0; k < grid.num_bins; ++k) {
    const double d = grid.center(k + 1) - y_hat;
    sum += q[k] * d * d;
  }
  return std::sqrt(std::max(sum, 0.0));
}

Eigen::VectorXd prune(const Eigen::VectorXd& q, const BinGrid& grid, const PruneConfig& config) {
  if (grid.kind != GridKind::Joint) {
    throw std::invalid_argument("prune is defined for Joint grids only");
  }
  if (q.size() != grid.num_bins) {
    throw std::invalid_argument("prune: histogram size does not match grid");
  }
  const int k_count = grid.num_bins;

  // Voiced peak; ties resolve to the lowest index.
  int k_v = grid.voiced_first;
  for (int k = grid.voiced_first; k <= grid.voiced_last; ++k) {
    if (q[k - 1] > q[k_v - 1]) k_v = k;
  }
  const double unvoiced_peak = q[0];
  const double voiced_peak = q[k_v - 1];
  if (unvoiced_peak < config.delta || voiced_peak < config.delta) {
    return q;  // no simultaneous peaks: leave the distribution alone
  }

  int sup_lo;
  int sup_hi;
  if (unvoiced_peak > voiced_peak) {
    sup_lo = k_v - config.delta_k;
    sup_hi = k_v + config.delta_k;
  } else {
    // Covers the tie: favor the voiced peak.
    sup_lo = 1;
    sup_hi = 1 + config.delta_k;
  }
  sup_lo = std::max(sup_lo, 1);
  sup_hi = std::min(sup_hi, k_count);

  Eigen::VectorXd out = q;
  double removed = 0.0;
  for (int k = sup_lo; k <= sup_hi; ++k) {
    removed += out[k - 1];
    out[k - 1] = 0.0;
  }
  const double keep = 1.0 - removed;
  for (int k = 1; k <= k_count; ++k) {
    if (k < sup_lo || k > sup_hi) out[k - 1] /= keep;
  }
  return out;
}

double voicing_boundary(const BinGrid& grid) {
  if (grid.kind != GridKind::Joint) {
    throw std::invalid_argument("voicing_boundary is defined for Joint grids only");
  }
  return 0.5 * (grid.center(1) + grid.center(grid.voiced_first));
}

namespace {

// Expectation restricted to the voiced bins, renormalized; falls back to the
// argmax voiced bin center when no voiced mass survives.
double voiced_expectation(const Eigen::VectorXd& q, const BinGrid& grid) {
  double mass = 0.0;
  double sum = 0.0;
  int argmax = grid.voiced_first;
  for (int k = grid.voiced_first; k <= grid.voiced_last; ++k) {
    const double qk = q[k - 1];
    mass += qk;
    sum += qk * grid.center(k);
    if (qk > q[argmax - 1]) argmax = k;
  }
  if (mass <= std::numeric_limits<double>::min()) {
    return grid.center(argmax);
  }
  return sum / mass;
}

}  // namespace

MelodyEstimate decode_frame(Method method, const PredictedHistogram& heads, const BinGrid& grid,
                            bool prune_enabled, const PruneConfig& prune_config) {
  if (!uses_histogram(method)) {
    throw std::invalid_argument("decode_frame expects a histogram method");
  }
  MelodyEstimate out;
  if (method == Method::M3) {
    if (grid.kind != GridKind::VoicedOnly) {
      throw std::invalid_argument("decode_frame: M3 requires a voiced-only grid");
    }
    out.y_hat = expectation(heads.q, grid);
    out.sigma_hat = std_dev(heads.q, grid, out.y_hat);
    out.voiced = heads.voicing_prob >= 0.5;
    out.shadow_pitch_hz = log_to_hz(out.y_hat);
    if (out.voiced) out.pitch_hz = out.shadow_pitch_hz;
    return out;
  }

  if (grid.kind != GridKind::Joint) {
    throw std::invalid_argument("decode_frame: M1/M2 require a Joint grid");
  }
  const Eigen::VectorXd q = prune_enabled ? prune(heads.q, grid, prune_config) : heads.q;
  out.y_hat = expectation(q, grid);
  out.sigma_hat = std_dev(q, grid, out.y_hat);
  out.voiced = out.y_hat >= voicing_boundary(grid);
  // The raw-pitch shadow comes from the unpruned histogram: restricting to
  // the voiced bins already discards the unvoiced mass, and suppressing a
  // voiced peak is a voicing correction, not a pitch one. The emitted melody
  // (pitch_hz) does follow the pruned distribution.
  out.shadow_pitch_hz = log_to_hz(voiced_expectation(heads.q, grid));
  if (out.voiced) out.pitch_hz = log_to_hz(voiced_expectation(q, grid));
  return out;
}

MelodyEstimate decode_scalar(Method method, double y_hat, double sigma_hat, const BinGrid& grid) {
  if (uses_histogram(method)) {
    throw std::invalid_argument("decode_scalar expects a scalar method");
  }
  MelodyEstimate out;
  out.y_hat = y_hat;
  out.sigma_hat = sigma_hat;
  out.voiced = y_hat >= voicing_boundary(grid);
  out.shadow_pitch_hz = log_to_hz(y_hat);
  if (out.voiced) out.pitch_hz = out.shadow_pitch_hz;
  return out;
}

}  // namespace melohist
