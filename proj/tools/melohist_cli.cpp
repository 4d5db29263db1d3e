// melohist command-line front end: synth / train / predict / eval.
//
// Exit codes: 0 success, 2 configuration or usage error, 1 runtime failure.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

#include "melohist/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Histogram-based melody estimation with per-frame uncertainty"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key-value file with [subcommand] sections");

  melohist::SynthCommand synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--num-train", synth.num_train, "Training clips");
  synth_cmd->add_option("--num-test", synth.num_test, "Test clips");
  synth_cmd->add_option("--seed", synth.seed, "Recipe seed");
  synth_cmd->add_option("--duration", synth.duration_s, "Clip duration in seconds");
  synth_cmd->add_option("--freq-min", synth.freq_min_hz, "Lowest base frequency in Hz");
  synth_cmd->add_option("--freq-max", synth.freq_max_hz, "Highest base frequency in Hz");
  synth_cmd->add_option("--snr-db-min", synth.snr_db_min, "Lowest clip SNR in dB (>=200 disables noise)");
  synth_cmd->add_option("--snr-db-max", synth.snr_db_max, "Highest clip SNR in dB");
  synth_cmd->add_option("--accomp-prob", synth.accompaniment_prob,
                        "Probability of accompaniment sinusoids");
  synth_cmd->add_option("--accomp-gain-min", synth.accomp_gain_min,
                        "Smallest accompaniment amplitude relative to the lead");
  synth_cmd->add_option("--accomp-gain-max", synth.accomp_gain_max,
                        "Largest accompaniment amplitude relative to the lead");
  synth_cmd->add_option("--gap-prob", synth.gap_prob, "Probability of a voicing gap");
  synth_cmd->add_option("--vibrato-depth-min", synth.vibrato_depth_min_cents,
                        "Smallest vibrato depth in cents");
  synth_cmd->add_option("--vibrato-depth-max", synth.vibrato_depth_max_cents,
                        "Largest vibrato depth in cents");
  synth_cmd->add_option("--vibrato-rate-min", synth.vibrato_rate_min_hz,
                        "Slowest vibrato rate in Hz");
  synth_cmd->add_option("--vibrato-rate-max", synth.vibrato_rate_max_hz,
                        "Fastest vibrato rate in Hz");
  synth_cmd->add_option("--threads", synth.threads, "Worker pool cap");

  melohist::TrainCommand train;
  std::string train_method = "M3";
  std::string resume_path;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on the train split");
  train_cmd->add_option("--manifest", train.manifest, "Dataset manifest")->required();
  train_cmd->add_option("--out", train.out_dir, "Output directory")->required();
  train_cmd->add_option("--method", train_method, "M1, M2, M3, M_MSE or M_NLL");
  train_cmd->add_option("--epochs", train.config.epochs, "Epochs to run");
  train_cmd->add_option("--learning-rate", train.config.learning_rate, "SGD step size");
  train_cmd->add_option("--seed", train.config.seed, "Initialization and shuffle seed");
  train_cmd->add_option("--batch-size", train.config.batch_size, "Frames per batch (0 = full)");
  train_cmd->add_option("--hidden", train.config.hidden_sizes, "Hidden layer sizes");
  train_cmd->add_option("--context", train.config.context_frames, "Context frames per side");
  train_cmd->add_option("--n-mels", train.config.n_mels, "Mel bands (0 = raw spectrogram bins)");
  train_cmd->add_option("--lambda", train.config.lambda, "Pitch-loss weight in the combined loss");
  train_cmd->add_option("--sigma-floor", train.config.sigma_floor,
                        "Floor for the error-tracking target sigma");
  train_cmd->add_flag("--invert-class-weights", train.config.invert_class_weights,
                      "Swap the voiced/unvoiced class weights");
  train_cmd->add_option("--resume", resume_path, "Continue from an existing checkpoint");
  train_cmd->add_option("--threads", train.threads, "Worker pool cap");

  melohist::PredictCommand predict;
  std::string expect_method;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Decode per-frame melody estimates");
  predict_cmd->add_option("--manifest", predict.manifest, "Dataset manifest")->required();
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "Trained model")->required();
  predict_cmd->add_option("--out", predict.out_dir, "Output directory")->required();
  predict_cmd->add_option("--split", predict.split, "Manifest split to decode");
  predict_cmd->add_flag("--prune", predict.prune, "Apply dual-peak pruning (M1/M2)");
  predict_cmd->add_option("--delta", predict.prune_config.delta, "Pruning probability threshold");
  predict_cmd->add_option("--delta-k", predict.prune_config.delta_k,
                          "Bins suppressed around the losing peak");
  predict_cmd->add_option("--method", expect_method, "Fail unless the checkpoint uses this method");
  predict_cmd->add_option("--threads", predict.threads, "Worker pool cap");

  melohist::EvalCommand eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predictions against reference labels");
  eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--predictions", eval.predictions_dir, "Directory of .pred.csv files")
      ->required();
  eval_cmd->add_option("--out", eval.out_dir, "Output directory")->required();
  eval_cmd->add_option("--split", eval.split, "Manifest split to score");
  eval_cmd->add_option("--tolerance", eval.tolerance_cents, "Pitch tolerance in cents");
  eval_cmd->add_option("--sweep", eval.sweep_tolerances, "Tolerance sweep values in cents");
  eval_cmd->add_option("--mistake-u", eval.mistake_u, "U values for mistake-detection F1");
  eval_cmd->add_flag("--f1-per-dataset", eval.f1_per_dataset,
                     "Rank least-confident frames across the whole split instead of per clip");
  eval_cmd->add_option("--bootstrap-samples", eval.bootstrap_samples, "Bootstrap resamples");
  eval_cmd->add_option("--bootstrap-seed", eval.bootstrap_seed, "Bootstrap RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth_cmd) {
      melohist::cmd_synth(synth);
    } else if (*train_cmd) {
      train.config.method = melohist::method_from_string(train_method);
      if (!resume_path.empty()) train.resume = resume_path;
      melohist::cmd_train(train);
    } else if (*predict_cmd) {
      if (!expect_method.empty()) predict.expect_method = expect_method;
      melohist::cmd_predict(predict);
    } else if (*eval_cmd) {
      const melohist::EvalReport report = melohist::cmd_eval(eval);
      std::cout << "rpa " << report.rpa.mean << "  rca " << report.rca.mean << "  oa "
                << report.oa.mean << "  nll " << report.nll << "\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "melohist: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "melohist: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
