#include "melohist/spectrogram.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace melohist {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// FFTW planning is not thread-safe (execution is).
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

std::vector<double> hann_window(int size) {
  std::vector<double> w(size);
  for (int n = 0; n < size; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(kTwoPi * n / size));
  }
  return w;
}

Spectrogram spectrogram(std::span<const double> chunk) {
  if (chunk.size() != static_cast<std::size_t>(kChunkSamples)) {
    throw std::invalid_argument("spectrogram expects exactly one 16000-sample chunk");
  }
  static const std::vector<double> window = hann_window(kFftSize);

  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    in = fftw_alloc_real(kFftSize);
    out = fftw_alloc_complex(kNumFreqBins);
    plan = fftw_plan_dft_r2c_1d(kFftSize, in, out, FFTW_ESTIMATE);
  }

  Spectrogram spec;
  spec.mag.resize(kNumFreqBins, kFramesPerChunk);
  const int n = static_cast<int>(chunk.size());
  const int half = kFftSize / 2;
  for (int t = 0; t < kFramesPerChunk; ++t) {
    const int center = t * kHopSize;
    for (int i = 0; i < kFftSize; ++i) {
      in[i] = window[i] * chunk[reflect_index(center - half + i, n)];
    }
    fftw_execute(plan);
    for (int k = 0; k < kNumFreqBins; ++k) {
      spec.mag(k, t) = std::hypot(out[k][0], out[k][1]);
    }
  }

  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  return spec;
}

Eigen::MatrixXd mel_filterbank(int n_mels, double fmax_hz) {
  if (n_mels < 1) throw std::invalid_argument("mel_filterbank: n_mels must be positive");
  const double mel_max = hz_to_mel(fmax_hz);
  std::vector<double> points(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    points[i] = mel_to_hz(mel_max * i / (n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, kNumFreqBins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = points[m];
    const double mid = points[m + 1];
    const double hi = points[m + 2];
    for (int k = 0; k < kNumFreqBins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / kFftSize;
      double w = 0.0;
      if (f > lo && f < mid) {
        w = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

Eigen::MatrixXd log_features(const Spectrogram& spec, const Eigen::MatrixXd* mel) {
  const Eigen::MatrixXd logm = spec.mag.unaryExpr([](double x) { return std::log1p(x); });
  if (!mel) return logm.transpose();
  if (mel->cols() != spec.mag.rows()) {
    throw std::invalid_argument("log_features: mel filterbank does not match the spectrogram");
  }
  return (*mel * logm).transpose();
}

FeatureStats compute_feature_stats(const Eigen::MatrixXd& frames) {
  if (frames.rows() == 0) throw std::invalid_argument("compute_feature_stats: no frames");
  FeatureStats stats;
  stats.mean = frames.colwise().mean();
  stats.stdev.resize(frames.cols());
  const auto n = static_cast<double>(frames.rows());
  for (Eigen::Index c = 0; c < frames.cols(); ++c) {
    const double var = (frames.col(c).array() - stats.mean[c]).square().sum() / n;
    stats.stdev[c] = std::max(std::sqrt(var), 1e-6);
  }
  return stats;
}

Eigen::MatrixXd standardize_and_stack(const Eigen::MatrixXd& frames, const FeatureStats& stats,
                                      int context) {
  if (frames.cols() != stats.mean.size() || frames.cols() != stats.stdev.size()) {
    throw std::invalid_argument("standardize_and_stack: stats do not match the feature width");
  }
  if (context < 0) throw std::invalid_argument("standardize_and_stack: negative context");
  const Eigen::Index t_count = frames.rows();
  const Eigen::Index f_count = frames.cols();
  Eigen::MatrixXd z(t_count, f_count);
  for (Eigen::Index c = 0; c < f_count; ++c) {
    z.col(c) = (frames.col(c).array() - stats.mean[c]) / stats.stdev[c];
  }
  if (context == 0) return z;
  Eigen::MatrixXd stacked(t_count, (2 * context + 1) * f_count);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    for (int offset = -context; offset <= context; ++offset) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t + offset, 0, t_count - 1);
      stacked.block(t, (offset + context) * f_count, 1, f_count) = z.row(src);
    }
  }
  return stacked;
}

Eigen::MatrixXd features(const Spectrogram& spec, int context, const FeatureStats& stats,
                         const Eigen::MatrixXd* mel) {
  return standardize_and_stack(log_features(spec, mel), stats, context);
}

}  // namespace melohist
