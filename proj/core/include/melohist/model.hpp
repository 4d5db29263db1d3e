#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "melohist/losses.hpp"
#include "melohist/method.hpp"
#include "melohist/targets.hpp"

namespace melohist {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  bool empty() const { return weight.size() == 0; }
};

// Desk-scale per-frame model: an MLP feature extractor with LeakyReLU(0.01)
// hidden layers and method-specific linear heads. Which heads are populated
// depends on the method; unused heads stay empty.
struct ModelParams {
  Method method = Method::M3;
  std::vector<DenseLayer> hidden;
  DenseLayer pitch_head;    // K logits (M1/M2/M3)
  DenseLayer voicing_head;  // 1 logit  (M3)
  DenseLayer mean_head;     // 1 unit   (MMse/MNll)
  DenseLayer logvar_head;   // 1 unit   (MNll)

  std::size_t parameter_count() const;
};

struct TrainConfig {
  Method method = Method::M3;
  double learning_rate = 1e-3;
  int epochs = 100;
  std::uint64_t seed = 0;
  int context_frames = 2;               // feature frames stacked on each side
  std::vector<int> hidden_sizes = {256, 128};
  double lambda = 0.6;                  // pitch-loss scale in the combined loss
  double sigma_floor = kBinWidth;       // floor for the error-tracking sigma
  int batch_size = 256;                 // 0 = full batch
  int n_mels = 128;                     // 0 = raw spectrogram bins
  bool invert_class_weights = false;

  void validate() const;
};

// Glorot-uniform init, seeded and reproducible. pitch_bins is ignored by the
// scalar methods.
ModelParams init_params(Method method, int input_dim, const std::vector<int>& hidden_sizes,
                        int pitch_bins, std::uint64_t seed);

struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0]=input, then per hidden layer
  std::vector<Eigen::MatrixXd> preacts;      // per hidden layer
};

struct HeadOutputs {
  Eigen::MatrixXd pitch_logits;  // TxK
  Eigen::VectorXd voicing_logits;
  Eigen::VectorXd mean;
  Eigen::VectorXd logvar;
};

// Gradients of a scalar loss w.r.t. the head pre-activations.
struct HeadGrads {
  Eigen::MatrixXd pitch;
  Eigen::VectorXd voicing;
  Eigen::VectorXd mean;
  Eigen::VectorXd logvar;
};

HeadOutputs forward(const ModelParams& params, const Eigen::MatrixXd& features,
                    ForwardCache* cache = nullptr);

// Backprop through the trunk; the cache must come from a forward call with
// the same parameters (shape mismatches throw). Returns gradients in
// ModelParams layout.
ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                     const HeadGrads& head_grads);

// params <- params - alpha * grads, elementwise.
void sgd_step(ModelParams& params, const ModelParams& grads, double alpha);

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
Eigen::VectorXd sigmoid(const Eigen::VectorXd& logits);

// One training batch: standardized features plus per-frame targets. encoded
// holds log-pitch targets (NaN where a method defines none, e.g. unvoiced
// frames under M3).
struct Batch {
  Eigen::MatrixXd features;
  Eigen::VectorXd encoded;
  std::vector<std::uint8_t> voiced;
};

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;    // M3 only
  double pitch = 0.0;  // M3 only
};

// Full method loss (per-frame normalized) and, optionally, parameter
// gradients. frozen_targets overrides the per-frame target weights; the
// trainer passes precomputed targets for M1 and the gradient checker passes
// targets frozen at the base parameters to realize the stop-gradient
// contract for M2/M3.
LossBreakdown method_loss(const ModelParams& params, const Batch& batch, const BinGrid& grid,
                          const ClassWeights& weights, const TrainConfig& config,
                          const Eigen::MatrixXd* frozen_targets = nullptr,
                          ModelParams* grads_out = nullptr);

// Target weights as the method would build them at the current parameters
// (fixed sigma for M1, error-tracking sigma for M2/M3). Rows for frames
// without a target are zero.
Eigen::MatrixXd build_targets(const ModelParams& params, const Batch& batch, const BinGrid& grid,
                              const TrainConfig& config);

struct TrainDataset {
  Eigen::MatrixXd features;        // N x D, already standardized
  std::vector<FrameLabel> labels;  // N
};

struct EpochRecord {
  double total = 0.0;
  double bce = 0.0;
  double pitch = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> trace;  // one record per epoch run
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::vector<EpochRecord> partial)
      : std::runtime_error(what), partial_trace(std::move(partial)) {}
  std::vector<EpochRecord> partial_trace;
};

// Seeded mini-batch (or full-batch) gradient descent. M1 precomputes its
// targets once; M2/M3 rebuild them from the current predictions every step.
// epoch_offset shifts the per-epoch RNG streams so a resumed run continues
// the original schedule. Throws TrainingDiverged on non-finite loss.
TrainResult train(const TrainDataset& data, const TrainConfig& config,
                  const ModelParams* initial = nullptr, int epoch_offset = 0);

// Small randomized problem for gradient checking.
struct TinyInstance {
  Batch batch;
  BinGrid grid;
  ClassWeights weights;
  std::vector<int> hidden_sizes;
};
TinyInstance make_tiny_instance(Method method, std::uint64_t seed, int frames = 4,
                                int num_bins = 8, int feature_dim = 6);

// Compares analytic parameter gradients of the configured method's full loss
// against central finite differences; targets are frozen at the base
// parameters during perturbation. Returns the max relative error.
double grad_check(const TrainConfig& config, const TinyInstance& instance);

}  // namespace melohist
