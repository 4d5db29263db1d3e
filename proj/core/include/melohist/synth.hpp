#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "melohist/pitch_grid.hpp"

namespace melohist {

struct VibratoContour {
  double rate_hz = 5.0;
  double depth_cents = 30.0;
};

struct GlideContour {
  double start_hz = 220.0;
  double end_hz = 440.0;
};

// Recipe for one synthetic labeled clip: an additive-harmonic lead following
// the contour, optional steady accompaniment sinusoids, optional white noise
// at a given SNR, and voicing gaps where the lead is silent.
struct SynthSpec {
  double duration_s = 1.0;
  double base_freq_hz = 220.0;
  std::variant<std::monostate, VibratoContour, GlideContour> contour;  // monostate = constant
  int num_harmonics = 5;  // amplitudes roll off as 1/h
  struct Accompaniment {
    double freq_hz = 0.0;
    double gain = 0.0;  // amplitude relative to the lead fundamental
  };
  std::vector<Accompaniment> accompaniment;
  double noise_snr_db = std::numeric_limits<double>::infinity();  // inf = clean
  std::vector<std::pair<double, double>> voicing_gaps;  // [start, end) in seconds
  std::uint64_t seed = 0;
};

struct SynthClip {
  std::vector<double> samples;     // mono, 16 kHz
  std::vector<FrameLabel> labels;  // one per 10 ms frame, f0 at the frame center
};

// Instantaneous lead frequency at time t (ignores gaps).
double contour_freq(const SynthSpec& spec, double t);

// Deterministic per seed; throws if the contour leaves [51.91, 830.61] Hz or
// a gap falls outside the clip.
SynthClip synth_clip(const SynthSpec& spec);

// Non-overlapping 1-second blocks; the trailing remainder is dropped.
std::vector<std::span<const double>> chunk(std::span<const double> samples);

}  // namespace melohist
