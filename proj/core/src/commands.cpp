#include "melohist/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "melohist/common.hpp"
#include "melohist/dataset_io.hpp"
#include "melohist/synth.hpp"

namespace melohist {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, value);
  return buf;
}

json train_config_json(const TrainConfig& c) {
  return json{{"method", to_string(c.method)},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"context_frames", c.context_frames},
              {"hidden_sizes", c.hidden_sizes},
              {"lambda", c.lambda},
              {"sigma_floor", c.sigma_floor},
              {"batch_size", c.batch_size},
              {"n_mels", c.n_mels},
              {"invert_class_weights", c.invert_class_weights}};
}

// Per-clip audio rendered to per-chunk feature frames.
struct LoadedClip {
  std::string id;
  std::vector<Eigen::MatrixXd> chunk_logmel;          // per chunk: T x F
  std::vector<std::vector<FrameLabel>> chunk_labels;  // aligned, may be empty
};

std::vector<LoadedClip> load_split(const Manifest& manifest, const fs::path& base_dir,
                                   const std::string& split, const Eigen::MatrixXd* mel,
                                   bool with_labels, int threads) {
  std::vector<const ManifestEntry*> entries;
  for (const ManifestEntry& e : manifest.clips) {
    if (e.split == split) entries.push_back(&e);
  }
  std::vector<LoadedClip> clips(entries.size());
  parallel_for(static_cast<int>(entries.size()), threads, [&](int i) {
    const ManifestEntry& e = *entries[i];
    LoadedClip& clip = clips[i];
    clip.id = e.id;
    const std::vector<double> samples = read_wav(base_dir / e.audio);
    std::vector<FrameLabel> labels;
    if (with_labels) labels = read_labels(base_dir / e.labels);
    const auto blocks = chunk(samples);
    if (with_labels && labels.size() < blocks.size() * kFramesPerChunk) {
      throw std::runtime_error(e.id + ": label count does not cover the chunked audio");
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      clip.chunk_logmel.push_back(log_features(spectrogram(blocks[b]), mel));
      if (with_labels) {
        clip.chunk_labels.emplace_back(labels.begin() + b * kFramesPerChunk,
                                       labels.begin() + (b + 1) * kFramesPerChunk);
      }
    }
  });
  return clips;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << content;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace

void cmd_synth(const SynthCommand& cmd) {
  if (cmd.num_train < 0 || cmd.num_test < 0) {
    throw std::invalid_argument("cmd_synth: clip counts must be non-negative");
  }
  if (cmd.freq_min_hz < kFreqMinHz || cmd.freq_max_hz > kFreqMaxHz ||
      cmd.freq_min_hz >= cmd.freq_max_hz) {
    throw std::invalid_argument("cmd_synth: frequency range must lie inside [51.91, 830.61]");
  }
  std::error_code ec;
  fs::create_directories(cmd.out_dir, ec);
  if (ec) throw std::runtime_error(cmd.out_dir.string() + ": cannot create output directory");

  const json config_echo{{"num_train", cmd.num_train},
                         {"num_test", cmd.num_test},
                         {"seed", cmd.seed},
                         {"duration_s", cmd.duration_s},
                         {"freq_min_hz", cmd.freq_min_hz},
                         {"freq_max_hz", cmd.freq_max_hz},
                         {"snr_db_min", cmd.snr_db_min},
                         {"snr_db_max", cmd.snr_db_max},
                         {"accompaniment_prob", cmd.accompaniment_prob},
                         {"gap_prob", cmd.gap_prob},
                         {"vibrato_depth_min_cents", cmd.vibrato_depth_min_cents},
                         {"vibrato_depth_max_cents", cmd.vibrato_depth_max_cents},
                         {"vibrato_rate_min_hz", cmd.vibrato_rate_min_hz},
                         {"vibrato_rate_max_hz", cmd.vibrato_rate_max_hz},
                         {"accomp_gain_min", cmd.accomp_gain_min},
                         {"accomp_gain_max", cmd.accomp_gain_max}};

  const int total = cmd.num_train + cmd.num_test;
  Manifest manifest;
  manifest.seed = cmd.seed;
  manifest.config_echo = config_echo.dump();
  manifest.clips.resize(total);

  parallel_for(total, cmd.threads, [&](int i) {
    Rng rng(mix_seed(cmd.seed, static_cast<std::uint64_t>(i)));
    SynthSpec spec;
    spec.duration_s = cmd.duration_s;
    spec.seed = mix_seed(cmd.seed, 0xc11b0000ULL + static_cast<std::uint64_t>(i));
    const double depth_margin = std::exp2(cmd.vibrato_depth_max_cents / 1200.0);
    const double base_lo = std::max(cmd.freq_min_hz, kFreqMinHz * depth_margin * 1.001);
    const double base_hi = std::min(cmd.freq_max_hz, kFreqMaxHz / depth_margin * 0.999);
    spec.base_freq_hz = std::exp(rng.uniform(std::log(base_lo), std::log(base_hi)));

    // Draw every recipe variable unconditionally so datasets that differ only
    // in probabilities or SNR share the same underlying melodies.
    const double contour_pick = rng.uniform();
    const VibratoContour vibrato{
        rng.uniform(cmd.vibrato_rate_min_hz, cmd.vibrato_rate_max_hz),
        rng.uniform(cmd.vibrato_depth_min_cents, cmd.vibrato_depth_max_cents)};
    const double glide_semitones = rng.uniform(-4.0, 4.0);
    const int harmonics = 4 + rng.uniform_int(5);
    const double gap_pick = rng.uniform();
    const double gap_len = rng.uniform(0.10, 0.30);
    const double gap_start_frac = rng.uniform();
    const double accomp_pick = rng.uniform();
    const int accomp_count = 1 + rng.uniform_int(2);
    const double accomp_freq_a = rng.uniform(100.0, 2000.0);
    const double accomp_freq_b = rng.uniform(100.0, 2000.0);
    const double accomp_gain_a = rng.uniform(cmd.accomp_gain_min, cmd.accomp_gain_max);
    const double accomp_gain_b = rng.uniform(cmd.accomp_gain_min, cmd.accomp_gain_max);
    const double snr_db = rng.uniform(cmd.snr_db_min, cmd.snr_db_max);

    if (contour_pick < 0.25) {
      // constant contour
    } else if (contour_pick < 0.70) {
      spec.contour = vibrato;
    } else {
      GlideContour glide;
      glide.start_hz = spec.base_freq_hz;
      glide.end_hz = std::clamp(spec.base_freq_hz * std::exp2(glide_semitones / 12.0), 60.0, 800.0);
      spec.contour = glide;
    }
    spec.num_harmonics = harmonics;
    if (gap_pick < cmd.gap_prob && cmd.duration_s > gap_len + 0.2) {
      const double start = 0.05 + gap_start_frac * (cmd.duration_s - gap_len - 0.10);
      spec.voicing_gaps = {{start, start + gap_len}};
    }
    if (accomp_pick < cmd.accompaniment_prob) {
      spec.accompaniment.push_back({accomp_freq_a, accomp_gain_a});
      if (accomp_count > 1) spec.accompaniment.push_back({accomp_freq_b, accomp_gain_b});
    }
    if (snr_db < 200.0) spec.noise_snr_db = snr_db;

    const bool is_train = i < cmd.num_train;
    char name[32];
    std::snprintf(name, sizeof(name), "%s_%04d", is_train ? "train" : "test",
                  is_train ? i : i - cmd.num_train);
    const SynthClip clip = synth_clip(spec);
    write_wav(cmd.out_dir / (std::string(name) + ".wav"), clip.samples);
    write_labels(cmd.out_dir / (std::string(name) + ".f0.txt"), clip.labels);

    ManifestEntry& entry = manifest.clips[i];
    entry.id = name;
    entry.audio = std::string(name) + ".wav";
    entry.labels = std::string(name) + ".f0.txt";
    entry.split = is_train ? "train" : "test";
  });

  write_manifest(cmd.out_dir / "manifest.json", manifest);
}

void cmd_train(const TrainCommand& cmd) {
  const Manifest manifest = read_manifest(cmd.manifest);
  const fs::path base_dir = cmd.manifest.parent_path();

  TrainConfig config = cmd.config;
  FeatureStats stats;
  ModelParams initial;
  bool have_initial = false;
  int epoch_offset = 0;
  if (cmd.resume) {
    const Checkpoint previous = load_checkpoint(*cmd.resume);
    config = previous.config;
    config.epochs = cmd.config.epochs;  // extra epochs to run
    stats = previous.stats;
    initial = previous.params;
    have_initial = true;
    epoch_offset = previous.epochs_completed;
  }
  config.validate();

  Eigen::MatrixXd mel;
  const Eigen::MatrixXd* mel_ptr = nullptr;
  if (config.n_mels > 0) {
    mel = mel_filterbank(config.n_mels);
    mel_ptr = &mel;
  }
  const std::vector<LoadedClip> clips =
      load_split(manifest, base_dir, "train", mel_ptr, /*with_labels=*/true, cmd.threads);
  if (clips.empty()) throw std::runtime_error("cmd_train: no clips in the train split");

  Eigen::Index total_frames = 0;
  for (const LoadedClip& clip : clips) {
    total_frames += static_cast<Eigen::Index>(clip.chunk_logmel.size()) * kFramesPerChunk;
  }
  if (total_frames == 0) throw std::runtime_error("cmd_train: train split holds no full chunks");

  if (!cmd.resume) {
    const Eigen::Index width = clips.front().chunk_logmel.front().cols();
    Eigen::MatrixXd pooled(total_frames, width);
    Eigen::Index row = 0;
    for (const LoadedClip& clip : clips) {
      for (const Eigen::MatrixXd& frames : clip.chunk_logmel) {
        pooled.middleRows(row, frames.rows()) = frames;
        row += frames.rows();
      }
    }
    stats = compute_feature_stats(pooled);
  }

  TrainDataset data;
  const int stacked_width = static_cast<int>(stats.mean.size()) * (2 * config.context_frames + 1);
  data.features.resize(total_frames, stacked_width);
  data.labels.reserve(total_frames);
  Eigen::Index row = 0;
  for (const LoadedClip& clip : clips) {
    for (std::size_t b = 0; b < clip.chunk_logmel.size(); ++b) {
      data.features.middleRows(row, kFramesPerChunk) =
          standardize_and_stack(clip.chunk_logmel[b], stats, config.context_frames);
      row += kFramesPerChunk;
      data.labels.insert(data.labels.end(), clip.chunk_labels[b].begin(),
                         clip.chunk_labels[b].end());
    }
  }

  std::error_code ec;
  fs::create_directories(cmd.out_dir, ec);
  if (ec) throw std::runtime_error(cmd.out_dir.string() + ": cannot create output directory");
  const fs::path trace_path = cmd.out_dir / "loss_trace.csv";

  auto write_trace = [&](const std::vector<EpochRecord>& trace) {
    const bool append = cmd.resume && fs::exists(trace_path);
    std::ofstream out(trace_path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw std::runtime_error(trace_path.string() + ": cannot write");
    if (!append) {
      out << "# melohist train\n";
      out << "# config: " << train_config_json(config).dump() << "\n";
      out << "epoch,loss,bce,pitch\n";
    }
    for (std::size_t e = 0; e < trace.size(); ++e) {
      out << (epoch_offset + static_cast<int>(e) + 1) << ',' << fmt("%.9f", trace[e].total) << ','
          << fmt("%.9f", trace[e].bce) << ',' << fmt("%.9f", trace[e].pitch) << "\n";
    }
  };

  TrainResult result;
  try {
    result = train(data, config, have_initial ? &initial : nullptr, epoch_offset);
  } catch (const TrainingDiverged& diverged) {
    write_trace(diverged.partial_trace);
    throw std::runtime_error(std::string(diverged.what()) + " (partial trace preserved)");
  }
  write_trace(result.trace);

  Checkpoint checkpoint;
  checkpoint.config = config;
  checkpoint.stats = stats;
  checkpoint.params = result.params;
  checkpoint.epochs_completed = epoch_offset + static_cast<int>(result.trace.size());
  save_checkpoint(checkpoint, cmd.out_dir / "checkpoint.json");
}

void cmd_predict(const PredictCommand& cmd) {
  const Checkpoint checkpoint = load_checkpoint(cmd.checkpoint);
  const Method method = checkpoint.config.method;
  if (cmd.expect_method && method_from_string(*cmd.expect_method) != method) {
    throw std::runtime_error("cmd_predict: checkpoint method " + to_string(method) +
                             " does not match requested " + *cmd.expect_method);
  }
  bool prune_enabled = cmd.prune;
  if (prune_enabled && !(method == Method::M1 || method == Method::M2)) {
    std::cerr << "melohist: warning: pruning applies to M1/M2 only; ignoring --prune for "
              << to_string(method) << "\n";
    prune_enabled = false;
  }

  const Manifest manifest = read_manifest(cmd.manifest);
  const fs::path base_dir = cmd.manifest.parent_path();
  Eigen::MatrixXd mel;
  const Eigen::MatrixXd* mel_ptr = nullptr;
  if (checkpoint.config.n_mels > 0) {
    mel = mel_filterbank(checkpoint.config.n_mels);
    mel_ptr = &mel;
  }
  const std::vector<LoadedClip> clips =
      load_split(manifest, base_dir, cmd.split, mel_ptr, /*with_labels=*/false, cmd.threads);
  if (clips.empty()) throw std::runtime_error("cmd_predict: no clips in split " + cmd.split);

  std::error_code ec;
  fs::create_directories(cmd.out_dir, ec);
  if (ec) throw std::runtime_error(cmd.out_dir.string() + ": cannot create output directory");

  const BinGrid grid = make_grid(grid_for(method));
  const json config_echo{{"checkpoint", cmd.checkpoint.string()},
                         {"manifest", cmd.manifest.string()},
                         {"split", cmd.split},
                         {"method", to_string(method)},
                         {"prune", prune_enabled},
                         {"delta", cmd.prune_config.delta},
                         {"delta_k", cmd.prune_config.delta_k}};
  const std::string header =
      "# melohist predictions\n# config: " + config_echo.dump() +
      "\ntime,voiced,pitch_hz,shadow_pitch_hz,y_hat,sigma_hat\n";

  parallel_for(static_cast<int>(clips.size()), cmd.threads, [&](int i) {
    const LoadedClip& clip = clips[i];
    std::string body = header;
    int frame_index = 0;
    for (const Eigen::MatrixXd& logmel : clip.chunk_logmel) {
      const Eigen::MatrixXd feats =
          standardize_and_stack(logmel, checkpoint.stats, checkpoint.config.context_frames);
      const HeadOutputs heads = forward(checkpoint.params, feats);
      Eigen::MatrixXd q;
      Eigen::VectorXd vprob;
      if (uses_histogram(method)) {
        q = softmax_rows(heads.pitch_logits);
        if (method == Method::M3) vprob = sigmoid(heads.voicing_logits);
      }
      for (int t = 0; t < kFramesPerChunk; ++t, ++frame_index) {
        MelodyEstimate est;
        if (uses_histogram(method)) {
          PredictedHistogram frame;
          frame.q = q.row(t);
          frame.voicing_prob = method == Method::M3 ? vprob[t] : 1.0;
          est = decode_frame(method, frame, grid, prune_enabled, cmd.prune_config);
        } else {
          const double sigma =
              method == Method::MNll ? std::exp(0.5 * heads.logvar[t]) : 0.0;
          est = decode_scalar(method, heads.mean[t], sigma, grid);
        }
        body += fmt("%.6f", frame_index * 0.010);
        body += est.voiced ? ",1," : ",0,";
        if (est.pitch_hz) body += fmt("%.6f", *est.pitch_hz);
        body += ',';
        body += fmt("%.6f", est.shadow_pitch_hz);
        body += ',';
        body += fmt("%.9f", est.y_hat);
        body += ',';
        body += fmt("%.9f", est.sigma_hat);
        body += '\n';
      }
    }
    write_text_file(cmd.out_dir / (clip.id + ".pred.csv"), body);
  });
}

namespace {

struct PredFile {
  std::string method;
  std::vector<MelodyEstimate> frames;
};

PredFile read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open predictions");
  PredFile pred;
  std::string line;
  bool saw_columns = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# config:", 0) == 0) {
      const json j = json::parse(line.substr(9));
      pred.method = j.at("method").get<std::string>();
      continue;
    }
    if (line[0] == '#') continue;
    if (!saw_columns) {  // column header
      saw_columns = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 6) fields.emplace_back();
    MelodyEstimate est;
    est.voiced = fields[1] == "1";
    if (!fields[2].empty()) est.pitch_hz = std::stod(fields[2]);
    est.shadow_pitch_hz = std::stod(fields[3]);
    est.y_hat = std::stod(fields[4]);
    est.sigma_hat = std::stod(fields[5]);
    pred.frames.push_back(est);
  }
  if (pred.method.empty()) {
    throw std::runtime_error(path.string() + ": missing config header");
  }
  return pred;
}

}  // namespace

EvalReport cmd_eval(const EvalCommand& cmd) {
  const Manifest manifest = read_manifest(cmd.manifest);
  const fs::path base_dir = cmd.manifest.parent_path();

  std::vector<ClipFrames> clips;
  std::string method_name;
  for (const ManifestEntry& entry : manifest.clips) {
    if (entry.split != cmd.split) continue;
    const std::vector<FrameLabel> labels = read_labels(base_dir / entry.labels);
    const PredFile pred = read_predictions(cmd.predictions_dir / (entry.id + ".pred.csv"));
    if (method_name.empty()) {
      method_name = pred.method;
    } else if (method_name != pred.method) {
      throw std::runtime_error("cmd_eval: predictions mix methods " + method_name + " and " +
                               pred.method);
    }
    const std::size_t n_pred = pred.frames.size();
    if (n_pred == 0 || n_pred % kFramesPerChunk != 0) {
      throw std::runtime_error(entry.id + ": prediction frame count is not a whole chunk count");
    }
    if (labels.size() < n_pred || labels.size() - n_pred >= kFramesPerChunk) {
      throw std::runtime_error(entry.id + ": frame-count mismatch between labels and predictions");
    }
    const std::size_t n_chunks = n_pred / kFramesPerChunk;
    for (std::size_t b = 0; b < n_chunks; ++b) {
      ClipFrames clip;
      clip.id = entry.id;
      if (n_chunks > 1) {
        char suffix[32];
        std::snprintf(suffix, sizeof(suffix), "_c%02u", static_cast<unsigned>(b));
        clip.id += suffix;
      }
      clip.ref.assign(labels.begin() + b * kFramesPerChunk,
                      labels.begin() + (b + 1) * kFramesPerChunk);
      clip.est.assign(pred.frames.begin() + b * kFramesPerChunk,
                      pred.frames.begin() + (b + 1) * kFramesPerChunk);
      clips.push_back(std::move(clip));
    }
  }
  if (clips.empty()) throw std::runtime_error("cmd_eval: nothing to evaluate in split " + cmd.split);

  EvalOptions options;
  options.method = method_from_string(method_name);
  options.tolerance_cents = cmd.tolerance_cents;
  options.sweep_tolerances = cmd.sweep_tolerances;
  options.mistake_u = cmd.mistake_u;
  options.f1_per_dataset = cmd.f1_per_dataset;
  options.bootstrap_samples = cmd.bootstrap_samples;
  options.bootstrap_seed = cmd.bootstrap_seed;

  const json config_echo{{"manifest", cmd.manifest.string()},
                         {"predictions", cmd.predictions_dir.string()},
                         {"split", cmd.split},
                         {"method", method_name},
                         {"tolerance_cents", cmd.tolerance_cents},
                         {"sweep_tolerances", cmd.sweep_tolerances},
                         {"mistake_u", cmd.mistake_u},
                         {"f1_per_dataset", cmd.f1_per_dataset},
                         {"bootstrap_samples", cmd.bootstrap_samples},
                         {"bootstrap_seed", cmd.bootstrap_seed}};

  EvalReport report = evaluate_dataset(clips, options);
  report.config_echo = config_echo.dump();

  std::error_code ec;
  fs::create_directories(cmd.out_dir, ec);
  if (ec) throw std::runtime_error(cmd.out_dir.string() + ": cannot create output directory");

  write_text_file(cmd.out_dir / "report.json", eval_report_json(report) + "\n");

  const std::string echo_line = "# config: " + config_echo.dump() + "\n";
  {
    std::string csv = "# melohist eval\n" + echo_line + "metric,value,ci_lo,ci_hi\n";
    auto metric_row = [&](const char* name, const MetricWithCi& m) {
      csv += std::string(name) + "," + fmt("%.9f", m.mean) + "," + fmt("%.9f", m.lo) + "," +
             fmt("%.9f", m.hi) + "\n";
    };
    metric_row("rpa", report.rpa);
    metric_row("rca", report.rca);
    metric_row("oa", report.oa);
    csv += "nll," + fmt("%.9f", report.nll) + ",,\n";
    for (const auto& [u, f1] : report.mistake_f1) {
      csv += "f1_u" + std::to_string(u) + "," + fmt("%.9f", f1) + ",,\n";
    }
    write_text_file(cmd.out_dir / "metrics.csv", csv);
  }
  {
    std::string csv = "# melohist eval\n" + echo_line + "tolerance_cents,rpa,rca,oa\n";
    for (const SweepRow& row : report.sweep) {
      csv += fmt("%.1f", row.tolerance_cents) + "," + fmt("%.9f", row.rpa) + "," +
             fmt("%.9f", row.rca) + "," + fmt("%.9f", row.oa) + "\n";
    }
    write_text_file(cmd.out_dir / "tolerance_sweep.csv", csv);
  }
  {
    // One row per reference-voiced frame, for sigma-vs-error plots.
    const BinGrid grid = make_grid(grid_for(options.method));
    std::string csv = "# melohist eval\n" + echo_line + "clip,time,abs_error,sigma_hat\n";
    for (const ClipFrames& clip : clips) {
      for (std::size_t t = 0; t < clip.ref.size(); ++t) {
        if (!clip.ref[t].voiced()) continue;
        const double y = encode_frame(clip.ref[t], grid);
        csv += clip.id + "," + fmt("%.6f", t * 0.010) + "," +
               fmt("%.9f", std::fabs(y - clip.est[t].y_hat)) + "," +
               fmt("%.9f", clip.est[t].sigma_hat) + "\n";
      }
    }
    write_text_file(cmd.out_dir / "scatter.csv", csv);
  }
  {
    std::string csv = "# melohist eval\n" + echo_line +
                      "clip,time,ref_hz,est_hz,est_lo_hz,est_hi_hz\n";
    for (const ClipFrames& clip : clips) {
      for (std::size_t t = 0; t < clip.ref.size(); ++t) {
        const MelodyEstimate& est = clip.est[t];
        const double est_log = hz_to_log(est.shadow_pitch_hz);
        csv += clip.id + "," + fmt("%.6f", t * 0.010) + "," + fmt("%.6f", clip.ref[t].freq_hz) +
               "," + fmt("%.6f", est.shadow_pitch_hz) + "," +
               fmt("%.6f", log_to_hz(est_log - est.sigma_hat)) + "," +
               fmt("%.6f", log_to_hz(est_log + est.sigma_hat)) + "\n";
      }
    }
    write_text_file(cmd.out_dir / "melody_overlay.csv", csv);
  }
  return report;
}

}  // namespace melohist
