#include "melohist/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "melohist/common.hpp"
#include "melohist/spectrogram.hpp"

namespace melohist {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

bool in_gap(const SynthSpec& spec, double t) {
  for (const auto& [start, end] : spec.voicing_gaps) {
    if (t >= start && t < end) return true;
  }
  return false;
}

}  // namespace

double contour_freq(const SynthSpec& spec, double t) {
  if (const auto* vib = std::get_if<VibratoContour>(&spec.contour)) {
    const double cents = vib->depth_cents * std::sin(kTwoPi * vib->rate_hz * t);
    return spec.base_freq_hz * std::exp2(cents / 1200.0);
  }
  if (const auto* glide = std::get_if<GlideContour>(&spec.contour)) {
    const double frac = spec.duration_s > 0.0 ? t / spec.duration_s : 0.0;
    return glide->start_hz * std::pow(glide->end_hz / glide->start_hz, frac);
  }
  return spec.base_freq_hz;
}

SynthClip synth_clip(const SynthSpec& spec) {
  if (!(spec.duration_s > 0.0)) throw std::invalid_argument("synth_clip: duration must be positive");
  if (spec.num_harmonics < 1) throw std::invalid_argument("synth_clip: need at least one harmonic");
  for (const auto& [start, end] : spec.voicing_gaps) {
    if (!(start >= 0.0) || !(end > start) || end > spec.duration_s) {
      throw std::invalid_argument("synth_clip: voicing gap outside the clip");
    }
  }

  const auto n_samples = static_cast<int>(std::llround(spec.duration_s * kSampleRate));
  const auto n_frames = static_cast<int>(std::llround(spec.duration_s * 100.0));

  SynthClip clip;
  clip.samples.resize(n_samples, 0.0);

  // Lead: phase-continuous additive harmonics, muted inside gaps.
  double phase = 0.0;
  for (int n = 0; n < n_samples; ++n) {
    const double t = static_cast<double>(n) / kSampleRate;
    const double f0 = contour_freq(spec, t);
    if (f0 < kFreqMinHz - 1e-9 || f0 > kFreqMaxHz + 1e-9) {
      throw std::invalid_argument("synth_clip: contour leaves the supported pitch range");
    }
    phase += kTwoPi * f0 / kSampleRate;
    if (in_gap(spec, t)) continue;
    double s = 0.0;
    for (int h = 1; h <= spec.num_harmonics; ++h) {
      s += std::sin(h * phase) / static_cast<double>(h);
    }
    clip.samples[n] = s;
  }

  for (const auto& acc : spec.accompaniment) {
    for (int n = 0; n < n_samples; ++n) {
      const double t = static_cast<double>(n) / kSampleRate;
      clip.samples[n] += acc.gain * std::sin(kTwoPi * acc.freq_hz * t);
    }
  }

  if (std::isfinite(spec.noise_snr_db)) {
    double power = 0.0;
    for (double s : clip.samples) power += s * s;
    power /= std::max(1, n_samples);
    const double noise_std = std::sqrt(power * std::pow(10.0, -spec.noise_snr_db / 10.0));
    Rng rng(mix_seed(spec.seed, 0x5011d));
    for (double& s : clip.samples) s += noise_std * rng.normal();
  }

  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::fabs(s));
  const double scale = 0.5 / std::max(peak, 1e-12);
  for (double& s : clip.samples) s *= scale;

  clip.labels.resize(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    const double center = t * 0.010;
    clip.labels[t].freq_hz = in_gap(spec, center) ? 0.0 : contour_freq(spec, center);
  }
  return clip;
}

std::vector<std::span<const double>> chunk(std::span<const double> samples) {
  std::vector<std::span<const double>> blocks;
  for (std::size_t begin = 0; begin + kChunkSamples <= samples.size(); begin += kChunkSamples) {
    blocks.push_back(samples.subspan(begin, kChunkSamples));
  }
  return blocks;
}

}  // namespace melohist
