#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "melohist/checkpoint.hpp"
#include "melohist/decode.hpp"
#include "melohist/metrics.hpp"

namespace melohist {

// Pipeline entry points backing the CLI subcommands. All outputs embed the
// effective configuration and are byte-identical across reruns with the same
// inputs and seeds.

struct SynthCommand {
  std::filesystem::path out_dir;
  int num_train = 200;
  int num_test = 50;
  std::uint64_t seed = 7;
  double duration_s = 1.0;
  double freq_min_hz = 110.0;
  double freq_max_hz = 660.0;
  double snr_db_min = 40.0;
  double snr_db_max = 40.0;
  double accompaniment_prob = 0.0;
  double gap_prob = 0.7;
  double vibrato_depth_min_cents = 10.0;
  double vibrato_depth_max_cents = 50.0;
  double vibrato_rate_min_hz = 4.0;
  double vibrato_rate_max_hz = 7.0;
  double accomp_gain_min = 0.15;
  double accomp_gain_max = 0.40;
  int threads = 1;
};
// Writes <id>.wav / <id>.f0.txt per clip plus manifest.json with disjoint
// train/test splits.
void cmd_synth(const SynthCommand& cmd);

struct TrainCommand {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  TrainConfig config;
  // Continue from an existing checkpoint; config.epochs then counts extra
  // epochs and the remaining settings come from the checkpoint.
  std::optional<std::filesystem::path> resume;
  int threads = 1;
};
// Writes checkpoint.json and loss_trace.csv (appended on resume). On
// divergence the partial trace is preserved and the error rethrown.
void cmd_train(const TrainCommand& cmd);

struct PredictCommand {
  std::filesystem::path manifest;
  std::filesystem::path checkpoint;
  std::filesystem::path out_dir;
  std::string split = "test";
  bool prune = false;
  PruneConfig prune_config;
  // When set, the checkpoint's method must match.
  std::optional<std::string> expect_method;
  int threads = 1;
};
// Writes one <id>.pred.csv per manifest clip:
// time,voiced,pitch_hz,shadow_pitch_hz,y_hat,sigma_hat.
void cmd_predict(const PredictCommand& cmd);

struct EvalCommand {
  std::filesystem::path manifest;
  std::filesystem::path predictions_dir;
  std::filesystem::path out_dir;
  std::string split = "test";
  double tolerance_cents = 50.0;
  std::vector<double> sweep_tolerances = {12.5, 25.0, 37.5, 50.0};
  std::vector<int> mistake_u = {10, 20, 30};
  bool f1_per_dataset = false;
  int bootstrap_samples = 1000;
  std::uint64_t bootstrap_seed = 0;
};
// Writes report.json, metrics.csv, tolerance_sweep.csv, scatter.csv
// (|y - y_hat| vs sigma_hat per voiced frame) and melody_overlay.csv.
EvalReport cmd_eval(const EvalCommand& cmd);

}  // namespace melohist
