#include "melohist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "melohist/common.hpp"

namespace melohist {

namespace {

double chroma_distance_cents(double est_hz, double ref_hz) {
  const double d = 1200.0 * std::log2(est_hz / ref_hz);
  double m = std::fmod(d, 1200.0);
  if (m < 0.0) m += 1200.0;
  return std::min(m, 1200.0 - m);
}

void require_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("reference/estimate frame counts differ");
}

}  // namespace

std::optional<PitchAccuracy> rpa_rca(std::span<const FrameLabel> ref,
                                     std::span<const MelodyEstimate> est,
                                     double tolerance_cents) {
  require_aligned(ref.size(), est.size());
  int voiced = 0;
  int raw_hits = 0;
  int chroma_hits = 0;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    if (!ref[t].voiced()) continue;
    ++voiced;
    if (cents_between(est[t].shadow_pitch_hz, ref[t].freq_hz) <= tolerance_cents) ++raw_hits;
    if (chroma_distance_cents(est[t].shadow_pitch_hz, ref[t].freq_hz) <= tolerance_cents) {
      ++chroma_hits;
    }
  }
  if (voiced == 0) return std::nullopt;
  PitchAccuracy acc;
  acc.rpa = static_cast<double>(raw_hits) / voiced;
  acc.rca = static_cast<double>(chroma_hits) / voiced;
  return acc;
}

double overall_accuracy(std::span<const FrameLabel> ref, std::span<const MelodyEstimate> est,
                        double tolerance_cents) {
  require_aligned(ref.size(), est.size());
  if (ref.empty()) throw std::invalid_argument("overall_accuracy: empty clip");
  int correct = 0;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    if (!ref[t].voiced()) {
      if (!est[t].voiced) ++correct;
    } else if (est[t].voiced) {
      // Voiced frames are scored on the emitted melody stream.
      const double est_hz = est[t].pitch_hz.value_or(est[t].shadow_pitch_hz);
      if (cents_between(est_hz, ref[t].freq_hz) <= tolerance_cents) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ref.size());
}

double nll_metric(std::span<const double> ref_encoded, std::span<const double> y_hat,
                  std::span<const double> sigma_hat) {
  require_aligned(ref_encoded.size(), y_hat.size());
  require_aligned(ref_encoded.size(), sigma_hat.size());
  if (ref_encoded.empty()) throw std::invalid_argument("nll_metric: empty inclusion set");
  constexpr double kTwoPi = 6.28318530717958647692;
  const double sigma_floor = kBinWidth * 1e-3;
  double sum = 0.0;
  for (std::size_t t = 0; t < ref_encoded.size(); ++t) {
    const double sigma = std::max(sigma_hat[t], sigma_floor);
    const double diff = ref_encoded[t] - y_hat[t];
    sum += std::log(kTwoPi * sigma * sigma) + diff * diff / (sigma * sigma);
  }
  return sum / (2.0 * static_cast<double>(ref_encoded.size()));
}

namespace {

struct VoicedFrame {
  double sigma_hat;
  bool mistake;
  std::size_t index;  // tie-break: earlier frames flagged first
};

void flag_and_count(std::vector<VoicedFrame>& frames, int u, long& tp, long& fp, long& fn) {
  std::stable_sort(frames.begin(), frames.end(), [](const VoicedFrame& a, const VoicedFrame& b) {
    if (a.sigma_hat != b.sigma_hat) return a.sigma_hat > b.sigma_hat;
    return a.index < b.index;
  });
  const std::size_t flagged = std::min<std::size_t>(frames.size(), static_cast<std::size_t>(u));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const bool is_flagged = i < flagged;
    if (is_flagged && frames[i].mistake) ++tp;
    if (is_flagged && !frames[i].mistake) ++fp;
    if (!is_flagged && frames[i].mistake) ++fn;
  }
}

}  // namespace

double mistake_f1(std::span<const ClipFrames> clips, int u, double tolerance_cents,
                  bool per_dataset) {
  if (u < 1) throw std::invalid_argument("mistake_f1: u must be at least 1");
  long tp = 0;
  long fp = 0;
  long fn = 0;
  std::vector<VoicedFrame> pooled;
  std::size_t global_index = 0;
  for (const ClipFrames& clip : clips) {
    require_aligned(clip.ref.size(), clip.est.size());
    std::vector<VoicedFrame> frames;
    for (std::size_t t = 0; t < clip.ref.size(); ++t) {
      if (!clip.ref[t].voiced()) continue;
      VoicedFrame f;
      f.sigma_hat = clip.est[t].sigma_hat;
      f.mistake = cents_between(clip.est[t].shadow_pitch_hz, clip.ref[t].freq_hz) > tolerance_cents;
      f.index = global_index++;
      frames.push_back(f);
    }
    if (per_dataset) {
      pooled.insert(pooled.end(), frames.begin(), frames.end());
    } else {
      flag_and_count(frames, u, tp, fp, fn);
    }
  }
  if (per_dataset) flag_and_count(pooled, u, tp, fp, fn);

  const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::vector<SweepRow> tolerance_sweep(std::span<const ClipFrames> clips,
                                      std::span<const double> tolerances) {
  std::vector<SweepRow> rows;
  for (double tol : tolerances) {
    SweepRow row;
    row.tolerance_cents = tol;
    double rpa_sum = 0.0;
    double rca_sum = 0.0;
    double oa_sum = 0.0;
    int defined = 0;
    for (const ClipFrames& clip : clips) {
      oa_sum += overall_accuracy(clip.ref, clip.est, tol);
      if (const auto acc = rpa_rca(clip.ref, clip.est, tol)) {
        rpa_sum += acc->rpa;
        rca_sum += acc->rca;
        ++defined;
      }
    }
    row.rpa = defined > 0 ? rpa_sum / defined : 0.0;
    row.rca = defined > 0 ? rca_sum / defined : 0.0;
    row.oa = clips.empty() ? 0.0 : oa_sum / static_cast<double>(clips.size());
    rows.push_back(row);
  }
  return rows;
}

std::pair<double, double> bootstrap_ci(std::span<const double> clip_metrics, int b,
                                       std::uint64_t seed) {
  if (clip_metrics.empty()) throw std::invalid_argument("bootstrap_ci: empty metric list");
  if (b < 1) throw std::invalid_argument("bootstrap_ci: need at least one resample");
  const std::size_t n = clip_metrics.size();
  Rng rng(mix_seed(seed, 0xb001));
  std::vector<double> means(b);
  for (int i = 0; i < b; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sum += clip_metrics[rng.next() % n];
    }
    means[i] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(b - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= means.size()) return means.back();
    const double frac = h - static_cast<double>(lo);
    return means[lo] + frac * (means[lo + 1] - means[lo]);
  };
  return {quantile(0.025), quantile(0.975)};
}

EvalReport evaluate_dataset(std::span<const ClipFrames> clips, const EvalOptions& options) {
  if (clips.empty()) throw std::invalid_argument("evaluate_dataset: no clips");
  EvalReport report;
  report.num_clips = static_cast<int>(clips.size());

  std::vector<double> rpa_values;
  std::vector<double> rca_values;
  std::vector<double> oa_values;
  for (const ClipFrames& clip : clips) {
    oa_values.push_back(overall_accuracy(clip.ref, clip.est, options.tolerance_cents));
    if (const auto acc = rpa_rca(clip.ref, clip.est, options.tolerance_cents)) {
      rpa_values.push_back(acc->rpa);
      rca_values.push_back(acc->rca);
    }
  }

  auto aggregate = [&](const std::vector<double>& values, std::uint64_t stream) {
    MetricWithCi m;
    if (values.empty()) return m;
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    std::tie(m.lo, m.hi) =
        bootstrap_ci(values, options.bootstrap_samples, mix_seed(options.bootstrap_seed, stream));
    return m;
  };
  report.rpa = aggregate(rpa_values, 1);
  report.rca = aggregate(rca_values, 2);
  report.oa = aggregate(oa_values, 3);

  // Dataset NLL; M3 models pitch only on voiced frames.
  const BinGrid grid = make_grid(grid_for(options.method));
  std::vector<double> y;
  std::vector<double> y_hat;
  std::vector<double> sigma_hat;
  for (const ClipFrames& clip : clips) {
    for (std::size_t t = 0; t < clip.ref.size(); ++t) {
      if (options.method == Method::M3 && !clip.ref[t].voiced()) continue;
      y.push_back(encode_frame(clip.ref[t], grid));
      y_hat.push_back(clip.est[t].y_hat);
      sigma_hat.push_back(clip.est[t].sigma_hat);
    }
  }
  report.nll = nll_metric(y, y_hat, sigma_hat);

  for (int u : options.mistake_u) {
    report.mistake_f1[u] =
        mistake_f1(clips, u, options.tolerance_cents, options.f1_per_dataset);
  }
  report.sweep = tolerance_sweep(clips, options.sweep_tolerances);
  return report;
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::json j;
  j["schema_version"] = report.schema_version;
  if (!report.config_echo.empty()) {
    j["config"] = nlohmann::json::parse(report.config_echo);
  }
  j["num_clips"] = report.num_clips;
  auto metric = [](const MetricWithCi& m) {
    return nlohmann::json{{"mean", m.mean}, {"ci_lo", m.lo}, {"ci_hi", m.hi}};
  };
  j["metrics"] = {{"rpa", metric(report.rpa)}, {"rca", metric(report.rca)},
                  {"oa", metric(report.oa)}};
  j["nll"] = report.nll;
  nlohmann::json f1 = nlohmann::json::object();
  for (const auto& [u, value] : report.mistake_f1) f1[std::to_string(u)] = value;
  j["mistake_f1"] = f1;
  nlohmann::json sweep = nlohmann::json::array();
  for (const SweepRow& row : report.sweep) {
    sweep.push_back({{"tolerance_cents", row.tolerance_cents},
                     {"rpa", row.rpa},
                     {"rca", row.rca},
                     {"oa", row.oa}});
  }
  j["tolerance_sweep"] = sweep;
  return j.dump(2);
}

}  // namespace melohist
