#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "melohist/decode.hpp"
#include "melohist/method.hpp"

namespace melohist {

// Reference labels and decoded estimates for one clip (a 1-second chunk).
struct ClipFrames {
  std::string id;
  std::vector<FrameLabel> ref;
  std::vector<MelodyEstimate> est;
};

struct PitchAccuracy {
  double rpa = 0.0;
  double rca = 0.0;
};

// Raw pitch / raw chroma accuracy over reference-voiced frames, scored on the
// estimate's shadow pitch regardless of its voicing decision. Returns nullopt
// when the clip has no voiced reference frame (excluded from aggregation).
std::optional<PitchAccuracy> rpa_rca(std::span<const FrameLabel> ref,
                                     std::span<const MelodyEstimate> est, double tolerance_cents);

// Fraction of frames with the voicing decision correct and, for voiced
// frames, the pitch within tolerance.
double overall_accuracy(std::span<const FrameLabel> ref, std::span<const MelodyEstimate> est,
                        double tolerance_cents);

// Mean Gaussian negative log-likelihood of the reference under (y_hat,
// sigma_hat): (1/2|D|) * sum[ln(2 pi s^2) + (y-y_hat)^2/s^2]. sigma is
// floored at bin_width * 1e-3.
double nll_metric(std::span<const double> ref_encoded, std::span<const double> y_hat,
                  std::span<const double> sigma_hat);

// F1 for detecting wrong pitch predictions among the u least confident
// (largest sigma_hat) reference-voiced frames. u applies per clip unless
// per_dataset is set, in which case frames are ranked across the whole set.
double mistake_f1(std::span<const ClipFrames> clips, int u, double tolerance_cents,
                  bool per_dataset = false);

struct SweepRow {
  double tolerance_cents = 0.0;
  double rpa = 0.0;
  double rca = 0.0;
  double oa = 0.0;
};
std::vector<SweepRow> tolerance_sweep(std::span<const ClipFrames> clips,
                                      std::span<const double> tolerances);

// Percentile bootstrap over clip metrics: B resamples of size N with
// replacement, 2.5th/97.5th percentile of the resample means
// (linear-interpolation quantiles). Deterministic given (seed, B, inputs).
std::pair<double, double> bootstrap_ci(std::span<const double> clip_metrics, int b,
                                       std::uint64_t seed);

struct MetricWithCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct EvalOptions {
  Method method = Method::M3;
  double tolerance_cents = 50.0;
  std::vector<double> sweep_tolerances = {12.5, 25.0, 37.5, 50.0};
  std::vector<int> mistake_u = {10, 20, 30};
  bool f1_per_dataset = false;
  int bootstrap_samples = 1000;
  std::uint64_t bootstrap_seed = 0;
};

struct EvalReport {
  int schema_version = 1;
  std::string config_echo;  // effective run configuration, JSON
  int num_clips = 0;
  MetricWithCi rpa;
  MetricWithCi rca;
  MetricWithCi oa;
  double nll = 0.0;
  std::map<int, double> mistake_f1;
  std::vector<SweepRow> sweep;
};

// Aggregates all metrics over a set of clips: unweighted means over clips
// with bootstrap CIs, dataset NLL (voiced frames only for M3, every frame
// otherwise), mistake-detection F1 per u, and the tolerance sweep.
EvalReport evaluate_dataset(std::span<const ClipFrames> clips, const EvalOptions& options);

std::string eval_report_json(const EvalReport& report);

}  // namespace melohist
