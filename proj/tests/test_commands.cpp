#include <doctest.h>

#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>

#include "melohist/commands.hpp"
#include "melohist/dataset_io.hpp"

using namespace melohist;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "melohist_cmd_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool dirs_byte_identical(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> names_a;
  for (const auto& entry : fs::directory_iterator(a)) names_a.push_back(entry.path().filename());
  std::sort(names_a.begin(), names_a.end());
  std::vector<fs::path> names_b;
  for (const auto& entry : fs::directory_iterator(b)) names_b.push_back(entry.path().filename());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b) return false;
  for (const fs::path& name : names_a) {
    if (slurp(a / name) != slurp(b / name)) return false;
  }
  return true;
}

SynthCommand small_synth(const fs::path& out, int threads = 1) {
  SynthCommand cmd;
  cmd.out_dir = out;
  cmd.num_train = 6;
  cmd.num_test = 3;
  cmd.seed = 7;
  cmd.gap_prob = 0.6;
  cmd.threads = threads;
  return cmd;
}

TrainConfig small_train_config(Method method) {
  TrainConfig config;
  config.method = method;
  config.epochs = 2;
  config.seed = 5;
  config.hidden_sizes = {16};
  config.n_mels = 24;
  config.context_frames = 1;
  config.batch_size = 128;
  return config;
}

}  // namespace

TEST_SUITE("commands") {

TEST_CASE("synth is byte-identical across reruns and thread counts") {
  const fs::path a = fresh_dir("synth_a");
  const fs::path b = fresh_dir("synth_b");
  const fs::path c = fresh_dir("synth_c");
  cmd_synth(small_synth(a));
  cmd_synth(small_synth(b));
  cmd_synth(small_synth(c, /*threads=*/2));
  CHECK(dirs_byte_identical(a, b));
  CHECK(dirs_byte_identical(a, c));

  const Manifest manifest = read_manifest(a / "manifest.json");
  CHECK(manifest.clips.size() == 9);
  int train_count = 0;
  for (const auto& clip : manifest.clips) {
    if (clip.split == "train") ++train_count;
    CHECK(fs::exists(a / clip.audio));
    CHECK(fs::exists(a / clip.labels));
  }
  CHECK(train_count == 6);
}

TEST_CASE("synth with zero clips writes an empty but valid manifest") {
  const fs::path dir = fresh_dir("synth_empty");
  SynthCommand cmd = small_synth(dir);
  cmd.num_train = 0;
  cmd.num_test = 0;
  cmd_synth(cmd);
  const Manifest manifest = read_manifest(dir / "manifest.json");
  CHECK(manifest.clips.empty());
}

TEST_CASE("synth splits are disjoint") {
  const fs::path dir = fresh_dir("synth_disjoint");
  cmd_synth(small_synth(dir));
  const Manifest manifest = read_manifest(dir / "manifest.json");
  std::set<std::string> train_ids;
  std::set<std::string> test_ids;
  for (const auto& clip : manifest.clips) {
    (clip.split == "train" ? train_ids : test_ids).insert(clip.id);
  }
  for (const std::string& id : train_ids) CHECK(test_ids.count(id) == 0);
}

TEST_CASE("train smoke run, resume, and predict/eval round trip") {
  const fs::path data = fresh_dir("pipeline_data");
  cmd_synth(small_synth(data));

  const fs::path model_dir = fresh_dir("pipeline_model");
  TrainCommand train_cmd;
  train_cmd.manifest = data / "manifest.json";
  train_cmd.out_dir = model_dir;
  train_cmd.config = small_train_config(Method::M1);
  cmd_train(train_cmd);

  CHECK(fs::exists(model_dir / "checkpoint.json"));
  const std::string trace = slurp(model_dir / "loss_trace.csv");
  CHECK(trace.find("epoch,loss,bce,pitch") != std::string::npos);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 5);  // 2 header + column + 2 epochs

  // Resuming with 3 extra epochs extends the trace by 3 rows.
  TrainCommand resume_cmd = train_cmd;
  resume_cmd.config.epochs = 3;
  resume_cmd.resume = model_dir / "checkpoint.json";
  cmd_train(resume_cmd);
  const std::string extended = slurp(model_dir / "loss_trace.csv");
  CHECK(std::count(extended.begin(), extended.end(), '\n') == 8);
  CHECK(extended.substr(0, trace.size()) == trace);
  const Checkpoint resumed = load_checkpoint(model_dir / "checkpoint.json");
  CHECK(resumed.epochs_completed == 5);

  const fs::path pred_dir = fresh_dir("pipeline_pred");
  PredictCommand predict_cmd;
  predict_cmd.manifest = data / "manifest.json";
  predict_cmd.checkpoint = model_dir / "checkpoint.json";
  predict_cmd.out_dir = pred_dir;
  cmd_predict(predict_cmd);
  int pred_files = 0;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    ++pred_files;
    const std::string body = slurp(entry.path());
    CHECK(body.find("time,voiced,pitch_hz,shadow_pitch_hz,y_hat,sigma_hat") != std::string::npos);
    CHECK(std::count(body.begin(), body.end(), '\n') == 103);  // 3 header + 100 frames
  }
  CHECK(pred_files == 3);

  // Determinism of predict.
  const fs::path pred_dir2 = fresh_dir("pipeline_pred2");
  PredictCommand predict_cmd2 = predict_cmd;
  predict_cmd2.out_dir = pred_dir2;
  cmd_predict(predict_cmd2);
  CHECK(dirs_byte_identical(pred_dir, pred_dir2));

  const fs::path eval_dir = fresh_dir("pipeline_eval");
  EvalCommand eval_cmd;
  eval_cmd.manifest = data / "manifest.json";
  eval_cmd.predictions_dir = pred_dir;
  eval_cmd.out_dir = eval_dir;
  eval_cmd.bootstrap_samples = 200;
  const EvalReport report = cmd_eval(eval_cmd);
  CHECK(report.num_clips == 3);
  CHECK(fs::exists(eval_dir / "report.json"));
  CHECK(fs::exists(eval_dir / "metrics.csv"));
  CHECK(fs::exists(eval_dir / "tolerance_sweep.csv"));
  CHECK(fs::exists(eval_dir / "scatter.csv"));
  CHECK(fs::exists(eval_dir / "melody_overlay.csv"));

  // Scatter rows equal the voiced reference frame count of the test split.
  int voiced_frames = 0;
  const Manifest manifest = read_manifest(data / "manifest.json");
  for (const auto& clip : manifest.clips) {
    if (clip.split != "test") continue;
    for (const FrameLabel& label : read_labels(data / clip.labels)) {
      if (label.voiced()) ++voiced_frames;
    }
  }
  const std::string scatter = slurp(eval_dir / "scatter.csv");
  CHECK(std::count(scatter.begin(), scatter.end(), '\n') == voiced_frames + 3);

  // Rerunning eval reproduces the report byte for byte.
  const fs::path eval_dir2 = fresh_dir("pipeline_eval2");
  EvalCommand eval_cmd2 = eval_cmd;
  eval_cmd2.out_dir = eval_dir2;
  cmd_eval(eval_cmd2);
  CHECK(slurp(eval_dir / "report.json") == slurp(eval_dir2 / "report.json"));
}

TEST_CASE("predict rejects a method mismatch and ignores prune for M3") {
  const fs::path data = fresh_dir("m3_data");
  cmd_synth(small_synth(data));

  const fs::path model_dir = fresh_dir("m3_model");
  TrainCommand train_cmd;
  train_cmd.manifest = data / "manifest.json";
  train_cmd.out_dir = model_dir;
  train_cmd.config = small_train_config(Method::M3);
  cmd_train(train_cmd);

  PredictCommand predict_cmd;
  predict_cmd.manifest = data / "manifest.json";
  predict_cmd.checkpoint = model_dir / "checkpoint.json";
  predict_cmd.out_dir = fresh_dir("m3_pred");
  predict_cmd.expect_method = "M1";
  CHECK_THROWS_AS(cmd_predict(predict_cmd), std::runtime_error);

  predict_cmd.expect_method.reset();
  cmd_predict(predict_cmd);

  // --prune on an M3 checkpoint warns and changes nothing.
  PredictCommand pruned_cmd = predict_cmd;
  pruned_cmd.out_dir = fresh_dir("m3_pred_prune");
  pruned_cmd.prune = true;
  cmd_predict(pruned_cmd);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(predict_cmd.out_dir)) {
    files.push_back(entry.path().filename());
  }
  for (const fs::path& name : files) {
    const std::string a = slurp(predict_cmd.out_dir / name);
    const std::string b = slurp(pruned_cmd.out_dir / name);
    // Only the echoed prune flag may differ, never the decoded rows.
    CHECK(a.substr(a.find('\n', a.find("time,"))) ==
          b.substr(b.find('\n', b.find("time,"))));
  }
}

TEST_CASE("prune flag changes output only on dual-peak frames") {
  // Hand-built checkpoint whose logits are input-independent: zero weights
  // and a bias of fixed logits with peaks at the unvoiced bin and one voiced
  // bin on every frame.
  const fs::path data = fresh_dir("prune_data");
  SynthCommand synth_cmd = small_synth(data);
  synth_cmd.num_train = 1;
  synth_cmd.num_test = 1;
  cmd_synth(synth_cmd);

  const BinGrid grid = make_grid(GridKind::Joint);
  TrainConfig config = small_train_config(Method::M1);
  Checkpoint ck;
  ck.config = config;
  const int feat_dim = config.n_mels * (2 * config.context_frames + 1);
  ck.stats.mean = Eigen::VectorXd::Zero(config.n_mels);
  ck.stats.stdev = Eigen::VectorXd::Ones(config.n_mels);
  ck.params = init_params(Method::M1, feat_dim, config.hidden_sizes, grid.num_bins, 1);
  for (DenseLayer& layer : ck.params.hidden) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  ck.params.pitch_head.weight.setZero();
  ck.params.pitch_head.bias.setConstant(-8.0);
  ck.params.pitch_head.bias[0] = 2.0;    // unvoiced peak
  ck.params.pitch_head.bias[199] = 2.3;  // voiced peak
  ck.epochs_completed = 0;
  const fs::path ck_path = fresh_dir("prune_model") / "checkpoint.json";
  save_checkpoint(ck, ck_path);

  PredictCommand base;
  base.manifest = data / "manifest.json";
  base.checkpoint = ck_path;
  base.out_dir = fresh_dir("prune_off");
  cmd_predict(base);
  PredictCommand pruned = base;
  pruned.out_dir = fresh_dir("prune_on");
  pruned.prune = true;
  cmd_predict(pruned);

  const std::string off = slurp(base.out_dir / "test_0000.pred.csv");
  const std::string on = slurp(pruned.out_dir / "test_0000.pred.csv");
  CHECK(off != on);
  // With the dual peak suppressed toward the voiced side, the pruned decode
  // must declare every frame voiced.
  std::istringstream lines(on);
  std::string line;
  int voiced_rows = 0;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("time,", 0) == 0) continue;
    ++rows;
    if (line.find(",1,") != std::string::npos) ++voiced_rows;
  }
  CHECK(rows == 100);
  CHECK(voiced_rows == 100);
}

TEST_CASE("train rejects an unknown method string early") {
  CHECK_THROWS_AS(method_from_string("M9"), std::invalid_argument);
}

TEST_CASE("eval detects frame-count mismatches") {
  const fs::path data = fresh_dir("mismatch_data");
  SynthCommand synth_cmd = small_synth(data);
  synth_cmd.num_train = 1;
  synth_cmd.num_test = 1;
  cmd_synth(synth_cmd);

  const fs::path pred_dir = fresh_dir("mismatch_pred");
  std::ofstream out(pred_dir / "test_0000.pred.csv");
  out << "# melohist predictions\n";
  out << "# config: {\"method\":\"M1\"}\n";
  out << "time,voiced,pitch_hz,shadow_pitch_hz,y_hat,sigma_hat\n";
  for (int t = 0; t < 50; ++t) {  // not a whole chunk
    out << t * 0.01 << ",1,220.0,220.0,2.08,0.01\n";
  }
  out.close();

  EvalCommand eval_cmd;
  eval_cmd.manifest = data / "manifest.json";
  eval_cmd.predictions_dir = pred_dir;
  eval_cmd.out_dir = fresh_dir("mismatch_eval");
  CHECK_THROWS_AS(cmd_eval(eval_cmd), std::runtime_error);
}

}  // TEST_SUITE
