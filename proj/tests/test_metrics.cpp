#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "melohist/common.hpp"
#include "melohist/metrics.hpp"

using namespace melohist;

namespace {

MelodyEstimate est_from(double pitch_hz, bool voiced, double sigma = 0.0) {
  MelodyEstimate est;
  est.voiced = voiced;
  est.shadow_pitch_hz = pitch_hz;
  if (voiced) est.pitch_hz = pitch_hz;
  est.y_hat = hz_to_log(pitch_hz);
  est.sigma_hat = sigma;
  return est;
}

ClipFrames random_clip(Rng& rng, int frames) {
  ClipFrames clip;
  for (int t = 0; t < frames; ++t) {
    const bool ref_voiced = rng.uniform() < 0.7;
    clip.ref.push_back(FrameLabel{ref_voiced ? rng.uniform(60.0, 800.0) : 0.0});
    const double est_hz = rng.uniform(52.0, 825.0);
    clip.est.push_back(est_from(est_hz, rng.uniform() < 0.7, rng.uniform(0.0, 0.5)));
  }
  return clip;
}

// Brute-force reimplementation, sharing nothing with the library path.
struct BruteCounts {
  int voiced = 0, raw = 0, chroma = 0, oa = 0, total = 0;
};
BruteCounts brute_force(const ClipFrames& clip, double tol) {
  BruteCounts c;
  for (std::size_t t = 0; t < clip.ref.size(); ++t) {
    ++c.total;
    const double ref = clip.ref[t].freq_hz;
    const double est = clip.est[t].shadow_pitch_hz;
    if (ref > 0.0) {
      ++c.voiced;
      const double cents = 1200.0 * std::log(est / ref) / std::log(2.0);
      if (std::fabs(cents) <= tol) ++c.raw;
      double folded = std::fabs(cents);
      while (folded >= 1200.0) folded -= 1200.0;
      if (std::min(folded, 1200.0 - folded) <= tol) ++c.chroma;
      if (clip.est[t].voiced && std::fabs(cents) <= tol) ++c.oa;
    } else if (!clip.est[t].voiced) {
      ++c.oa;
    }
  }
  return c;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("rpa_rca on a perfect estimate") {
  ClipFrames clip;
  for (int t = 0; t < 10; ++t) {
    const double f = 100.0 + 30.0 * t;
    clip.ref.push_back(FrameLabel{f});
    clip.est.push_back(est_from(f, true));
  }
  const auto acc = rpa_rca(clip.ref, clip.est, 50.0);
  REQUIRE(acc.has_value());
  CHECK(acc->rpa == 1.0);
  CHECK(acc->rca == 1.0);
}

TEST_CASE("rpa_rca octave shift folds to chroma") {
  ClipFrames clip;
  for (int t = 0; t < 10; ++t) {
    const double f = 100.0 + 30.0 * t;
    clip.ref.push_back(FrameLabel{f});
    clip.est.push_back(est_from(2.0 * f, true));
  }
  const auto acc = rpa_rca(clip.ref, clip.est, 50.0);
  REQUIRE(acc.has_value());
  CHECK(acc->rpa == 0.0);
  CHECK(acc->rca == 1.0);
}

TEST_CASE("rpa_rca undefined without voiced reference frames") {
  ClipFrames clip;
  for (int t = 0; t < 5; ++t) {
    clip.ref.push_back(FrameLabel{0.0});
    clip.est.push_back(est_from(200.0, false));
  }
  CHECK_FALSE(rpa_rca(clip.ref, clip.est, 50.0).has_value());
}

TEST_CASE("rpa_rca matches a brute-force oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const ClipFrames clip = random_clip(rng, 50);
    const double tol = rng.uniform(10.0, 100.0);
    const BruteCounts c = brute_force(clip, tol);
    const auto acc = rpa_rca(clip.ref, clip.est, tol);
    if (c.voiced == 0) {
      CHECK_FALSE(acc.has_value());
      continue;
    }
    REQUIRE(acc.has_value());
    CHECK(acc->rpa == static_cast<double>(c.raw) / c.voiced);
    CHECK(acc->rca == static_cast<double>(c.chroma) / c.voiced);
    CHECK(acc->rpa <= acc->rca);
    CHECK(overall_accuracy(clip.ref, clip.est, tol) == static_cast<double>(c.oa) / c.total);
  }
}

TEST_CASE("overall_accuracy counting example") {
  ClipFrames clip;
  for (int t = 0; t < 5; ++t) {  // unvoiced, all correctly estimated unvoiced
    clip.ref.push_back(FrameLabel{0.0});
    clip.est.push_back(est_from(100.0, false));
  }
  for (int t = 0; t < 3; ++t) {  // voiced, within tolerance
    clip.ref.push_back(FrameLabel{200.0});
    clip.est.push_back(est_from(201.0, true));
  }
  for (int t = 0; t < 2; ++t) {  // voiced, off by a fifth
    clip.ref.push_back(FrameLabel{200.0});
    clip.est.push_back(est_from(300.0, true));
  }
  CHECK(overall_accuracy(clip.ref, clip.est, 50.0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("overall_accuracy all-unvoiced") {
  ClipFrames clip;
  for (int t = 0; t < 8; ++t) {
    clip.ref.push_back(FrameLabel{0.0});
    clip.est.push_back(est_from(120.0, false));
  }
  CHECK(overall_accuracy(clip.ref, clip.est, 50.0) == 1.0);
}

TEST_CASE("nll_metric anchors") {
  {
    const double sigma = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
    const std::vector<double> y{1.0};
    const std::vector<double> y_hat{1.0};
    const std::vector<double> s{sigma};
    CHECK(std::fabs(nll_metric(y, y_hat, s)) < 1e-12);
  }
  {
    const std::vector<double> y{2.0};
    const std::vector<double> y_hat{2.0};
    const std::vector<double> s{1.0};
    CHECK(nll_metric(y, y_hat, s) == doctest::Approx(0.9189385332).epsilon(1e-9));
  }
  {
    // Three frames, written out by hand.
    const std::vector<double> y{1.0, 0.0, 2.0};
    const std::vector<double> y_hat{1.2, 0.0, 1.5};
    const std::vector<double> s{0.5, 1.0, 0.1};
    const double expected = (std::log(2.0 * 3.14159265358979323846 * 0.25) + 0.04 / 0.25 +
                             std::log(2.0 * 3.14159265358979323846) +
                             std::log(2.0 * 3.14159265358979323846 * 0.01) + 0.25 / 0.01) /
                            6.0;
    CHECK(nll_metric(y, y_hat, s) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(nll_metric(y, y_hat, s) == doctest::Approx(4.113694442).epsilon(1e-9));
  }
  CHECK_THROWS_AS(nll_metric({}, {}, {}), std::invalid_argument);
}

TEST_CASE("nll_metric is minimized per frame at sigma = |error|") {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const double y = rng.uniform(-1.0, 4.0);
    const double y_hat = y + rng.uniform(0.01, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double best = std::fabs(y - y_hat);
    const std::vector<double> ys{y};
    const std::vector<double> yh{y_hat};
    const double at_best = nll_metric(ys, yh, std::vector<double>{best});
    for (int i = 0; i < 20; ++i) {
      const double other = rng.uniform(1e-4, 2.0);
      CHECK(at_best <= nll_metric(ys, yh, std::vector<double>{other}) + 1e-12);
    }
  }
}

TEST_CASE("mistake_f1 perfect ranking") {
  // sigma ordering identical to error ordering, exactly u mistakes per clip.
  ClipFrames clip;
  const int u = 3;
  for (int t = 0; t < 10; ++t) {
    clip.ref.push_back(FrameLabel{200.0});
    const bool mistake = t < u;
    clip.est.push_back(est_from(mistake ? 260.0 : 200.0, true, mistake ? 0.9 : 0.1));
  }
  std::vector<ClipFrames> clips{clip};
  CHECK(mistake_f1(clips, u, 50.0) == 1.0);
}

TEST_CASE("mistake_f1 zero actual mistakes") {
  ClipFrames clip;
  for (int t = 0; t < 10; ++t) {
    clip.ref.push_back(FrameLabel{200.0});
    clip.est.push_back(est_from(200.0, true, 0.1 * t));
  }
  std::vector<ClipFrames> clips{clip};
  CHECK(mistake_f1(clips, 3, 50.0) == 0.0);
}

TEST_CASE("mistake_f1 u beyond the voiced count flags everything") {
  ClipFrames clip;
  for (int t = 0; t < 4; ++t) {
    clip.ref.push_back(FrameLabel{200.0});
    clip.est.push_back(est_from(300.0, true, 0.5));  // all mistakes
  }
  std::vector<ClipFrames> clips{clip};
  CHECK(mistake_f1(clips, 100, 50.0) == 1.0);
}

TEST_CASE("mistake_f1 matches a brute-force confusion matrix") {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    ClipFrames clip = random_clip(rng, 30);
    std::vector<ClipFrames> clips{clip};
    const int u = 1 + rng.uniform_int(10);
    const double tol = 50.0;

    // Oracle: sort voiced-frame indices by sigma descending (stable).
    std::vector<std::size_t> voiced_idx;
    for (std::size_t t = 0; t < clip.ref.size(); ++t) {
      if (clip.ref[t].voiced()) voiced_idx.push_back(t);
    }
    std::stable_sort(voiced_idx.begin(), voiced_idx.end(), [&](std::size_t a, std::size_t b) {
      return clip.est[a].sigma_hat > clip.est[b].sigma_hat;
    });
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < voiced_idx.size(); ++i) {
      const std::size_t t = voiced_idx[i];
      const bool flagged = i < static_cast<std::size_t>(u);
      const bool mistake =
          cents_between(clip.est[t].shadow_pitch_hz, clip.ref[t].freq_hz) > tol;
      if (flagged && mistake) ++tp;
      if (flagged && !mistake) ++fp;
      if (!flagged && mistake) ++fn;
    }
    double expected = 0.0;
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    if (precision + recall > 0.0) expected = 2 * precision * recall / (precision + recall);
    CHECK(mistake_f1(clips, u, tol) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("tolerance_sweep perfect and offset estimates") {
  std::vector<ClipFrames> clips(1);
  for (int t = 0; t < 20; ++t) {
    clips[0].ref.push_back(FrameLabel{220.0});
    clips[0].est.push_back(est_from(220.0, true));
  }
  const std::vector<double> tols{12.5, 25.0, 37.5, 50.0};
  for (const SweepRow& row : tolerance_sweep(clips, tols)) {
    CHECK(row.rpa == 1.0);
    CHECK(row.rca == 1.0);
    CHECK(row.oa == 1.0);
  }

  // +30 cents everywhere: fails at 12.5/25, passes at 37.5/50.
  std::vector<ClipFrames> offset(1);
  for (int t = 0; t < 20; ++t) {
    offset[0].ref.push_back(FrameLabel{220.0});
    offset[0].est.push_back(est_from(220.0 * std::exp2(30.0 / 1200.0), true));
  }
  const auto rows = tolerance_sweep(offset, tols);
  CHECK(rows[0].rpa == 0.0);
  CHECK(rows[1].rpa == 0.0);
  CHECK(rows[2].rpa == 1.0);
  CHECK(rows[3].rpa == 1.0);
}

TEST_CASE("tolerance_sweep is monotone on random inputs") {
  Rng rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClipFrames> clips;
    for (int c = 0; c < 4; ++c) clips.push_back(random_clip(rng, 30));
    const std::vector<double> tols{12.5, 25.0, 37.5, 50.0};
    const auto rows = tolerance_sweep(clips, tols);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].rpa >= rows[i - 1].rpa);
      CHECK(rows[i].rca >= rows[i - 1].rca);
      CHECK(rows[i].oa >= rows[i - 1].oa);
    }
  }
}

TEST_CASE("bootstrap_ci degenerate inputs") {
  const std::vector<double> equal(12, 0.75);
  const auto [lo, hi] = bootstrap_ci(equal, 1000, 5);
  CHECK(lo == 0.75);
  CHECK(hi == 0.75);

  const std::vector<double> single{0.42};
  const auto [lo1, hi1] = bootstrap_ci(single, 500, 6);
  CHECK(lo1 == 0.42);
  CHECK(hi1 == 0.42);

  CHECK_THROWS_AS(bootstrap_ci({}, 100, 0), std::invalid_argument);
}

TEST_CASE("bootstrap_ci deterministic and ordered") {
  Rng rng(35);
  std::vector<double> metrics;
  for (int i = 0; i < 25; ++i) metrics.push_back(rng.uniform(0.5, 1.0));
  const auto a = bootstrap_ci(metrics, 1000, 9);
  const auto b = bootstrap_ci(metrics, 1000, 9);
  CHECK(a == b);
  CHECK(a.first <= a.second);
  const double mean = std::accumulate(metrics.begin(), metrics.end(), 0.0) / metrics.size();
  CHECK(a.first <= mean);
  CHECK(a.second >= mean);
}

TEST_CASE("evaluate_dataset on perfect predictions") {
  std::vector<ClipFrames> clips;
  Rng rng(36);
  for (int c = 0; c < 5; ++c) {
    ClipFrames clip;
    clip.id = "clip_" + std::to_string(c);
    for (int t = 0; t < 40; ++t) {
      const bool voiced = t % 5 != 0;
      const double f = voiced ? rng.uniform(60.0, 800.0) : 0.0;
      clip.ref.push_back(FrameLabel{f});
      MelodyEstimate est;
      est.voiced = voiced;
      est.shadow_pitch_hz = voiced ? f : 100.0;
      if (voiced) est.pitch_hz = f;
      est.y_hat = voiced ? hz_to_log(f) : -0.521;
      est.sigma_hat = 0.01;
      clip.est.push_back(est);
    }
    clips.push_back(std::move(clip));
  }
  EvalOptions options;
  options.method = Method::M1;
  const EvalReport report = evaluate_dataset(clips, options);
  CHECK(report.rpa.mean == 1.0);
  CHECK(report.rpa.lo == 1.0);
  CHECK(report.rpa.hi == 1.0);
  CHECK(report.oa.mean == 1.0);
  CHECK(report.num_clips == 5);
  CHECK(report.mistake_f1.at(10) == 0.0);  // no mistakes to detect
  const std::string json = eval_report_json(report);
  CHECK(json.find("\"rpa\"") != std::string::npos);
  CHECK(json.find("tolerance_sweep") != std::string::npos);
}

TEST_CASE("metric aggregation is invariant to clip order") {
  Rng rng(37);
  std::vector<ClipFrames> clips;
  for (int c = 0; c < 6; ++c) clips.push_back(random_clip(rng, 25));
  EvalOptions options;
  options.method = Method::M1;
  options.bootstrap_samples = 200;
  const EvalReport forward_order = evaluate_dataset(clips, options);
  std::reverse(clips.begin(), clips.end());
  const EvalReport reverse_order = evaluate_dataset(clips, options);
  CHECK(forward_order.rpa.mean == doctest::Approx(reverse_order.rpa.mean).epsilon(1e-12));
  CHECK(forward_order.oa.mean == doctest::Approx(reverse_order.oa.mean).epsilon(1e-12));
  CHECK(forward_order.nll == doctest::Approx(reverse_order.nll).epsilon(1e-12));
}

}  // TEST_SUITE
