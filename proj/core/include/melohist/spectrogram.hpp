#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace melohist {

inline constexpr int kSampleRate = 16000;
inline constexpr int kFftSize = 2048;
inline constexpr int kHopSize = 160;  // 10 ms
inline constexpr int kChunkSamples = 16000;
inline constexpr int kFramesPerChunk = 100;
inline constexpr int kNumFreqBins = kFftSize / 2 + 1;  // 1025

// Magnitude STFT of one 1-second chunk: kNumFreqBins x kFramesPerChunk.
struct Spectrogram {
  Eigen::MatrixXd mag;
};

// Periodic Hann window.
std::vector<double> hann_window(int size);

// 2048-point Hann, hop 160, frames centered via reflection padding; frame t
// (1-based) is centered at sample (t-1)*160. Throws unless the chunk holds
// exactly 16000 samples.
Spectrogram spectrogram(std::span<const double> chunk);

// Triangular mel filters (HTK mel scale) over the FFT bin frequencies;
// n_mels x kNumFreqBins.
Eigen::MatrixXd mel_filterbank(int n_mels, double fmax_hz = 8000.0);

// Per-frame log features, frames as rows: log1p of the magnitudes, then the
// optional mel compression. Pass mel == nullptr for raw spectrogram bins.
Eigen::MatrixXd log_features(const Spectrogram& spec, const Eigen::MatrixXd* mel);

// Per-feature standardization statistics; computed on the training split and
// persisted with the model checkpoint.
struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;  // floored at 1e-6
};
FeatureStats compute_feature_stats(const Eigen::MatrixXd& frames);

// (frames - mean) / stdev, then context stacking of +-context frames with
// edge replication: T x ((2*context+1)*F).
Eigen::MatrixXd standardize_and_stack(const Eigen::MatrixXd& frames, const FeatureStats& stats,
                                      int context);

// Full front end for one chunk.
Eigen::MatrixXd features(const Spectrogram& spec, int context, const FeatureStats& stats,
                         const Eigen::MatrixXd* mel);

}  // namespace melohist
