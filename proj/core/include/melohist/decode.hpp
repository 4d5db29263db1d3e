#pragma once

#include <Eigen/Core>
#include <optional>

#include "melohist/method.hpp"
#include "melohist/pitch_grid.hpp"

namespace melohist {

// One frame of model output ready for decoding. voicing_prob is only
// meaningful for M3.
struct PredictedHistogram {
  Eigen::VectorXd q;
  double voicing_prob = 1.0;
};

// Decoded frame: pitch_hz is present iff the frame is declared voiced;
// shadow_pitch_hz is always finite so raw-pitch metrics can score frames the
// model called unvoiced.
struct MelodyEstimate {
  bool voiced = false;
  std::optional<double> pitch_hz;
  double shadow_pitch_hz = 0.0;
  double y_hat = 0.0;      // log-pitch expectation
  double sigma_hat = 0.0;  // log-pitch standard deviation
};

// E[q] over bin centers.
double expectation(const Eigen::VectorXd& q, const BinGrid& grid);
// sqrt(E[(c - y_hat)^2]) over bin centers.
double std_dev(const Eigen::VectorXd& q, const BinGrid& grid, double y_hat);

struct PruneConfig {
  double delta = 0.01;  // probability threshold for both peaks
  int delta_k = 10;     // bins suppressed around the losing peak
};

// Dual-peak suppression on Joint grids: when both the unvoiced bin and some
// voiced bin carry at least delta, the less probable peak's neighborhood is
// zeroed and the rest renormalized. Ties suppress the unvoiced peak.
Eigen::VectorXd prune(const Eigen::VectorXd& q, const BinGrid& grid,
                      const PruneConfig& config = {});

// Joint-grid voicing rule: a frame is voiced when its expectation falls
// nearer the voiced range than the unvoiced bin, i.e. above the midpoint of
// the two attractor centers.
double voicing_boundary(const BinGrid& grid);

// Histogram methods (M1/M2/M3). prune_enabled only applies to Joint grids.
MelodyEstimate decode_frame(Method method, const PredictedHistogram& heads, const BinGrid& grid,
                            bool prune_enabled = false, const PruneConfig& prune_config = {});

// Scalar baselines (MMse/MNll): y_hat is the predicted log pitch directly.
MelodyEstimate decode_scalar(Method method, double y_hat, double sigma_hat, const BinGrid& grid);

}  // namespace melohist
