#include "melohist/pitch_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace melohist {

double BinGrid::left_edge(int k) const {
  if (k < 1 || k > num_bins) {
    throw std::out_of_range("bin index " + std::to_string(k) + " outside [1, " +
                            std::to_string(num_bins) + "]");
  }
  return a + (k - 1) * bin_width;
}

double BinGrid::center(int k) const { return left_edge(k) + 0.5 * bin_width; }

int BinGrid::bin_of(double value) const {
  const int k = 1 + static_cast<int>(std::floor((value - a) / bin_width));
  if (k < 1) return 1;
  if (k > num_bins) return num_bins;
  return k;
}

void BinGrid::validate() const {
  if (!(bin_width > 0.0)) throw std::invalid_argument("grid bin_width must be positive");
  if (num_bins < 2) throw std::invalid_argument("grid needs at least 2 bins");
  if (voiced_first < 1 || voiced_first > voiced_last || voiced_last > num_bins) {
    throw std::invalid_argument("grid voiced bin range is malformed");
  }
}

BinGrid make_grid(GridKind kind) {
  BinGrid grid;
  grid.kind = kind;
  grid.bin_width = kBinWidth;
  if (kind == GridKind::Joint) {
    // Unvoiced marker sits 50 bins below the voiced range; bin 1 is the
    // unvoiced bin.
    grid.a = -50.0 * kBinWidth;
    grid.num_bins = 435;
    grid.voiced_first = 51;
    grid.voiced_last = 435;
  } else {
    grid.a = 0.0;
    grid.num_bins = 385;
    grid.voiced_first = 1;
    grid.voiced_last = 385;
  }
  grid.validate();
  return grid;
}

double hz_to_log(double freq_hz) {
  if (!(freq_hz > 0.0)) {
    throw std::domain_error("hz_to_log requires a positive frequency");
  }
  return std::log2(freq_hz / kFreqMinHz);
}

double log_to_hz(double log_pitch) { return kFreqMinHz * std::exp2(log_pitch); }

double cents_between(double f1_hz, double f2_hz) {
  if (!(f1_hz > 0.0) || !(f2_hz > 0.0)) {
    throw std::domain_error("cents_between requires positive frequencies");
  }
  return 1200.0 * std::fabs(std::log2(f1_hz / f2_hz));
}

double encode_frame(const FrameLabel& label, const BinGrid& grid) {
  if (label.voiced()) return hz_to_log(label.freq_hz);
  if (grid.kind == GridKind::VoicedOnly) {
    throw std::invalid_argument("unvoiced frames carry no pitch target on a voiced-only grid");
  }
  return grid.a;
}

}  // namespace melohist
