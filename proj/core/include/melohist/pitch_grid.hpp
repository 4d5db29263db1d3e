#pragma once

#include <vector>

namespace melohist {

// Voiced pitch range covered by the models: G#1 to G#5.
inline constexpr double kFreqMinHz = 51.91;
inline constexpr double kFreqMaxHz = 830.61;
// Uniform bin width of the log-frequency support, in octaves (1/8 semitone).
inline constexpr double kBinWidth = 0.01042;

// Per-frame ground truth. freq_hz == 0 marks an unvoiced frame.
struct FrameLabel {
  double freq_hz = 0.0;
  bool voiced() const { return freq_hz > 0.0; }
};

enum class GridKind {
  // Single support holding the unvoiced marker bin plus the voiced range;
  // used by the joint histogram methods (M1/M2) and the scalar baselines.
  Joint,
  // Voiced range only; used by the voicing-classifier method (M3).
  VoicedOnly,
};

// Discretized log-frequency support. Bins are 1-based; bin k covers
// [l_k, l_k + bin_width) with l_k = a + (k-1)*bin_width, and the last bin is
// closed on the right.
struct BinGrid {
  double a = 0.0;          // left edge of the support, in octaves
  double bin_width = kBinWidth;
  int num_bins = 0;        // K
  int voiced_first = 1;    // first voiced bin (1-based)
  int voiced_last = 0;     // last voiced bin (1-based)
  GridKind kind = GridKind::Joint;

  double left_edge(int k) const;
  double center(int k) const;
  double right_end() const { return a + num_bins * bin_width; }
  // Value-to-bin mapping; values outside the support clamp to the boundary
  // bins.
  int bin_of(double value) const;
  void validate() const;
};

// Grids as used by the methods: Joint spans [-0.521, 4.0117] with K=435 and
// voiced bins 51..435; VoicedOnly spans [0, 4.0117] with K=385.
BinGrid make_grid(GridKind kind);

// log2(freq / 51.91); throws std::domain_error for non-positive input.
double hz_to_log(double freq_hz);
// Inverse of hz_to_log.
double log_to_hz(double log_pitch);
// 1200 * |log2(f1/f2)|; throws std::domain_error for non-positive input.
double cents_between(double f1_hz, double f2_hz);

// Per-frame training target on the grid support. Voiced frames map through
// hz_to_log; unvoiced frames map to the grid's left edge (-0.521) on Joint
// grids and are a precondition error on VoicedOnly grids.
double encode_frame(const FrameLabel& label, const BinGrid& grid);

}  // namespace melohist
