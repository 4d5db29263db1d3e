#include "melohist/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "melohist/common.hpp"
#include "melohist/decode.hpp"

namespace melohist {

std::string to_string(Method method) {
  switch (method) {
    case Method::M1: return "M1";
    case Method::M2: return "M2";
    case Method::M3: return "M3";
    case Method::MMse: return "M_MSE";
    case Method::MNll: return "M_NLL";
  }
  throw std::invalid_argument("unknown method");
}

Method method_from_string(std::string_view name) {
  if (name == "M1") return Method::M1;
  if (name == "M2") return Method::M2;
  if (name == "M3") return Method::M3;
  if (name == "M_MSE") return Method::MMse;
  if (name == "M_NLL") return Method::MNll;
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected M1, M2, M3, M_MSE or M_NLL)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(sigma_floor > 0.0)) throw std::invalid_argument("sigma_floor must be positive");
  if (batch_size < 0) throw std::invalid_argument("batch_size must be non-negative");
  if (context_frames < 0) throw std::invalid_argument("context_frames must be non-negative");
  if (n_mels < 0) throw std::invalid_argument("n_mels must be non-negative");
  for (int h : hidden_sizes) {
    if (h < 1) throw std::invalid_argument("hidden sizes must be positive");
  }
}

namespace {

constexpr double kLeakySlope = 0.01;

double leaky_relu(double x) { return x > 0.0 ? x : kLeakySlope * x; }
double leaky_relu_grad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

template <typename Params, typename Fn>
void visit_layers(Params& params, Fn&& fn) {
  for (auto& layer : params.hidden) fn(layer);
  fn(params.pitch_head);
  fn(params.voicing_head);
  fn(params.mean_head);
  fn(params.logvar_head);
}

DenseLayer glorot_layer(int out_dim, int in_dim, Rng& rng) {
  DenseLayer layer;
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  layer.weight.resize(out_dim, in_dim);
  for (int r = 0; r < out_dim; ++r) {
    for (int c = 0; c < in_dim; ++c) {
      layer.weight(r, c) = rng.uniform(-bound, bound);
    }
  }
  layer.bias = Eigen::VectorXd::Zero(out_dim);
  return layer;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams grads = params;
  visit_layers(grads, [](DenseLayer& layer) {
    layer.weight.setZero();
    layer.bias.setZero();
  });
  return grads;
}

}  // namespace

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  visit_layers(*this, [&](const DenseLayer& layer) {
    n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  });
  return n;
}

ModelParams init_params(Method method, int input_dim, const std::vector<int>& hidden_sizes,
                        int pitch_bins, std::uint64_t seed) {
  if (input_dim < 1) throw std::invalid_argument("init_params: input_dim must be positive");
  ModelParams params;
  params.method = method;
  Rng rng(mix_seed(seed, 0x1417));
  int in_dim = input_dim;
  for (int h : hidden_sizes) {
    params.hidden.push_back(glorot_layer(h, in_dim, rng));
    in_dim = h;
  }
  if (uses_histogram(method)) {
    if (pitch_bins < 2) throw std::invalid_argument("init_params: pitch_bins must be >= 2");
    params.pitch_head = glorot_layer(pitch_bins, in_dim, rng);
  }
  if (method == Method::M3) {
    params.voicing_head = glorot_layer(1, in_dim, rng);
  }
  if (method == Method::MMse || method == Method::MNll) {
    params.mean_head = glorot_layer(1, in_dim, rng);
  }
  if (method == Method::MNll) {
    params.logvar_head = glorot_layer(1, in_dim, rng);
  }
  return params;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(t).array() - m).exp();
    out.row(t) = e / e.sum();
  }
  return out;
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& logits) {
  Eigen::VectorXd out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    out[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return out;
}

HeadOutputs forward(const ModelParams& params, const Eigen::MatrixXd& features,
                    ForwardCache* cache) {
  if (!params.hidden.empty() && features.cols() != params.hidden.front().weight.cols()) {
    throw std::invalid_argument("forward: feature dimension does not match the model");
  }
  if (cache) {
    cache->activations.clear();
    cache->preacts.clear();
    cache->activations.push_back(features);
  }
  Eigen::MatrixXd act = features;
  for (const DenseLayer& layer : params.hidden) {
    Eigen::MatrixXd z = act * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    act = z.unaryExpr([](double x) { return leaky_relu(x); });
    if (cache) {
      cache->preacts.push_back(std::move(z));
      cache->activations.push_back(act);
    }
  }

  auto head_out = [&](const DenseLayer& head) -> Eigen::MatrixXd {
    Eigen::MatrixXd z = act * head.weight.transpose();
    z.rowwise() += head.bias.transpose();
    return z;
  };

  HeadOutputs out;
  if (!params.pitch_head.empty()) out.pitch_logits = head_out(params.pitch_head);
  if (!params.voicing_head.empty()) out.voicing_logits = head_out(params.voicing_head).col(0);
  if (!params.mean_head.empty()) out.mean = head_out(params.mean_head).col(0);
  if (!params.logvar_head.empty()) out.logvar = head_out(params.logvar_head).col(0);
  return out;
}

ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                     const HeadGrads& head_grads) {
  if (cache.activations.size() != params.hidden.size() + 1 ||
      cache.preacts.size() != params.hidden.size()) {
    throw std::invalid_argument("backward: cache does not match the model (stale cache?)");
  }
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    if (cache.activations[l].cols() != params.hidden[l].weight.cols()) {
      throw std::invalid_argument("backward: cache dimensions do not match the model");
    }
  }

  ModelParams grads = zeros_like(params);
  const Eigen::MatrixXd& trunk_out = cache.activations.back();
  Eigen::MatrixXd d_act = Eigen::MatrixXd::Zero(trunk_out.rows(), trunk_out.cols());

  auto apply_head = [&](const DenseLayer& head, DenseLayer& grad, const Eigen::MatrixXd& g) {
    if (head.empty() || g.size() == 0) return;
    if (g.rows() != trunk_out.rows() || g.cols() != head.weight.rows()) {
      throw std::invalid_argument("backward: head gradient shape mismatch");
    }
    grad.weight = g.transpose() * trunk_out;
    grad.bias = g.colwise().sum().transpose();
    d_act += g * head.weight;
  };

  apply_head(params.pitch_head, grads.pitch_head, head_grads.pitch);
  apply_head(params.voicing_head, grads.voicing_head, head_grads.voicing);
  apply_head(params.mean_head, grads.mean_head, head_grads.mean);
  apply_head(params.logvar_head, grads.logvar_head, head_grads.logvar);

  for (int l = static_cast<int>(params.hidden.size()) - 1; l >= 0; --l) {
    Eigen::MatrixXd dz =
        d_act.array() * cache.preacts[l].unaryExpr([](double x) { return leaky_relu_grad(x); }).array();
    grads.hidden[l].weight = dz.transpose() * cache.activations[l];
    grads.hidden[l].bias = dz.colwise().sum().transpose();
    d_act = dz * params.hidden[l].weight;
  }
  return grads;
}

void sgd_step(ModelParams& params, const ModelParams& grads, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("sgd_step: alpha must be non-negative");
  if (params.hidden.size() != grads.hidden.size()) {
    throw std::invalid_argument("sgd_step: gradient layout mismatch");
  }
  auto step = [alpha](DenseLayer& p, const DenseLayer& g) {
    if (p.empty()) return;
    p.weight -= alpha * g.weight;
    p.bias -= alpha * g.bias;
  };
  for (std::size_t l = 0; l < params.hidden.size(); ++l) step(params.hidden[l], grads.hidden[l]);
  step(params.pitch_head, grads.pitch_head);
  step(params.voicing_head, grads.voicing_head);
  step(params.mean_head, grads.mean_head);
  step(params.logvar_head, grads.logvar_head);
}

namespace {

// Target weights built from the current predicted histograms (M2/M3): the
// Gaussian mean is the ground truth, the standard deviation tracks the
// current prediction error. Rows without a pitch target stay zero.
Eigen::MatrixXd dynamic_targets_from_q(const Batch& batch, const BinGrid& grid,
                                       const TrainConfig& config, const Eigen::MatrixXd& q) {
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(q.rows(), grid.num_bins);
  const bool voiced_only = grid.kind == GridKind::VoicedOnly;
  for (Eigen::Index t = 0; t < q.rows(); ++t) {
    if (voiced_only && !batch.voiced[t]) continue;
    const double y = batch.encoded[t];
    const double y_hat = expectation(q.row(t), grid);
    const double sigma = dynamic_sigma(y, y_hat, config.sigma_floor);
    targets.row(t) = bin_weights(grid, y, sigma);
  }
  return targets;
}

Eigen::MatrixXd fixed_targets(const Batch& batch, const BinGrid& grid) {
  Eigen::MatrixXd targets(batch.encoded.size(), grid.num_bins);
  for (Eigen::Index t = 0; t < batch.encoded.size(); ++t) {
    targets.row(t) = bin_weights(grid, batch.encoded[t], grid.bin_width);
  }
  return targets;
}

}  // namespace

Eigen::MatrixXd build_targets(const ModelParams& params, const Batch& batch, const BinGrid& grid,
                              const TrainConfig& config) {
  switch (config.method) {
    case Method::M1:
      return fixed_targets(batch, grid);
    case Method::M2:
    case Method::M3: {
      const HeadOutputs heads = forward(params, batch.features);
      return dynamic_targets_from_q(batch, grid, config, softmax_rows(heads.pitch_logits));
    }
    default:
      return Eigen::MatrixXd(0, 0);
  }
}

LossBreakdown method_loss(const ModelParams& params, const Batch& batch, const BinGrid& grid,
                          const ClassWeights& weights, const TrainConfig& config,
                          const Eigen::MatrixXd* frozen_targets, ModelParams* grads_out) {
  const auto frames = static_cast<double>(batch.features.rows());
  if (frames == 0) throw std::invalid_argument("method_loss: empty batch");
  ForwardCache cache;
  const HeadOutputs heads = forward(params, batch.features, grads_out ? &cache : nullptr);

  LossBreakdown out;
  HeadGrads hg;
  switch (config.method) {
    case Method::M1:
    case Method::M2: {
      const Eigen::MatrixXd q = softmax_rows(heads.pitch_logits);
      Eigen::MatrixXd targets;
      if (!frozen_targets) {
        targets = config.method == Method::M1 ? fixed_targets(batch, grid)
                                              : dynamic_targets_from_q(batch, grid, config, q);
      }
      const Eigen::MatrixXd& p = frozen_targets ? *frozen_targets : targets;
      const LossValue whl = weighted_histogram_loss(p, q, batch.voiced, weights);
      out.total = whl.value / frames;
      if (grads_out) hg.pitch = whl.grad / frames;
      break;
    }
    case Method::M3: {
      const Eigen::MatrixXd q = softmax_rows(heads.pitch_logits);
      Eigen::MatrixXd targets;
      if (!frozen_targets) targets = dynamic_targets_from_q(batch, grid, config, q);
      const Eigen::MatrixXd& p = frozen_targets ? *frozen_targets : targets;
      const LossValue bce = weighted_bce(batch.voiced, sigmoid(heads.voicing_logits), weights);
      const LossValue hl = histogram_loss_batch(p, q, &batch.voiced);
      const CombinedLoss combined = bayes_loss(bce, hl, config.lambda);
      out.total = combined.value / frames;
      out.bce = combined.bce_value / frames;
      out.pitch = combined.pitch_value / frames;
      if (grads_out) {
        hg.pitch = combined.pitch_grad / frames;
        hg.voicing = combined.voicing_grad.col(0) / frames;
      }
      break;
    }
    case Method::MMse: {
      const LossValue mse = mse_loss(batch.encoded, heads.mean);
      out.total = mse.value;
      if (grads_out) hg.mean = mse.grad.col(0);
      break;
    }
    case Method::MNll: {
      const GaussianNllLoss nll = gaussian_nll_loss(batch.encoded, heads.mean, heads.logvar);
      out.total = nll.value;
      if (grads_out) {
        hg.mean = nll.grad_mean;
        hg.logvar = nll.grad_logvar;
      }
      break;
    }
  }
  if (grads_out) *grads_out = backward(params, cache, hg);
  return out;
}

namespace {

Batch slice_batch(const Eigen::MatrixXd& features, const Eigen::VectorXd& encoded,
                  const std::vector<std::uint8_t>& voiced, const std::vector<int>& order,
                  std::size_t begin, std::size_t end) {
  Batch batch;
  const auto rows = static_cast<Eigen::Index>(end - begin);
  batch.features.resize(rows, features.cols());
  batch.encoded.resize(rows);
  batch.voiced.resize(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const int src = order[i];
    const auto dst = static_cast<Eigen::Index>(i - begin);
    batch.features.row(dst) = features.row(src);
    batch.encoded[dst] = encoded[src];
    batch.voiced[i - begin] = voiced[src];
  }
  return batch;
}

}  // namespace

TrainResult train(const TrainDataset& data, const TrainConfig& config, const ModelParams* initial,
                  int epoch_offset) {
  config.validate();
  const auto n = static_cast<int>(data.features.rows());
  if (n == 0 || data.labels.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("train: dataset is empty or misaligned");
  }
  const BinGrid grid = make_grid(grid_for(config.method));

  Eigen::VectorXd encoded(n);
  std::vector<std::uint8_t> voiced(n);
  for (int i = 0; i < n; ++i) {
    voiced[i] = data.labels[i].voiced() ? 1 : 0;
    if (grid.kind == GridKind::VoicedOnly && !voiced[i]) {
      encoded[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      encoded[i] = encode_frame(data.labels[i], grid);
    }
  }
  const ClassWeights weights = class_weights(data.labels, config.invert_class_weights);

  TrainResult result;
  result.params = initial ? *initial
                          : init_params(config.method, static_cast<int>(data.features.cols()),
                                        config.hidden_sizes, grid.num_bins, config.seed);
  if (!result.params.hidden.empty() &&
      result.params.hidden.front().weight.cols() != data.features.cols()) {
    throw std::invalid_argument("train: initial parameters do not match the feature dimension");
  }

  // Fixed-sigma targets do not depend on the model; build them once.
  Eigen::MatrixXd precomputed;
  if (config.method == Method::M1) {
    precomputed.resize(n, grid.num_bins);
    for (int i = 0; i < n; ++i) {
      precomputed.row(i) = bin_weights(grid, encoded[i], grid.bin_width);
    }
  }

  const int batch_size = config.batch_size == 0 ? n : std::min(config.batch_size, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const int global_epoch = epoch_offset + epoch;
    Rng rng(mix_seed(config.seed, 0xe60c + static_cast<std::uint64_t>(global_epoch)));
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }

    EpochRecord record;
    for (int begin = 0; begin < n; begin += batch_size) {
      const int end = std::min(begin + batch_size, n);
      Batch batch = slice_batch(data.features, encoded, voiced, order,
                                static_cast<std::size_t>(begin), static_cast<std::size_t>(end));
      Eigen::MatrixXd frozen;
      const Eigen::MatrixXd* frozen_ptr = nullptr;
      if (config.method == Method::M1) {
        frozen.resize(end - begin, grid.num_bins);
        for (int i = begin; i < end; ++i) frozen.row(i - begin) = precomputed.row(order[i]);
        frozen_ptr = &frozen;
      }
      ModelParams grads;
      const LossBreakdown loss =
          method_loss(result.params, batch, grid, weights, config, frozen_ptr, &grads);
      if (!std::isfinite(loss.total)) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(global_epoch + 1) +
                                   ": non-finite loss",
                               result.trace);
      }
      sgd_step(result.params, grads, config.learning_rate);
      const double share = static_cast<double>(end - begin) / static_cast<double>(n);
      record.total += loss.total * share;
      record.bce += loss.bce * share;
      record.pitch += loss.pitch * share;
    }
    result.trace.push_back(record);
  }
  return result;
}

TinyInstance make_tiny_instance(Method method, std::uint64_t seed, int frames, int num_bins,
                                int feature_dim) {
  TinyInstance inst;
  inst.grid.kind = grid_for(method);
  inst.grid.bin_width = 0.25;
  inst.grid.num_bins = num_bins;
  if (inst.grid.kind == GridKind::Joint) {
    inst.grid.a = -0.5;
    inst.grid.voiced_first = std::min(3, num_bins);
    inst.grid.voiced_last = num_bins;
  } else {
    inst.grid.a = 0.0;
    inst.grid.voiced_first = 1;
    inst.grid.voiced_last = num_bins;
  }
  inst.grid.validate();

  Rng rng(mix_seed(seed, 0x7171));
  inst.batch.features.resize(frames, feature_dim);
  for (int t = 0; t < frames; ++t) {
    for (int d = 0; d < feature_dim; ++d) inst.batch.features(t, d) = rng.normal();
  }
  inst.batch.encoded.resize(frames);
  inst.batch.voiced.resize(frames);
  int voiced_count = 0;
  for (int t = 0; t < frames; ++t) {
    bool is_voiced = rng.uniform() < 0.7;
    if (t == 0) is_voiced = true;  // keep the pitch loss non-degenerate
    if (t == 1 && frames > 1) is_voiced = false;
    inst.batch.voiced[t] = is_voiced ? 1 : 0;
    voiced_count += is_voiced ? 1 : 0;
    if (is_voiced) {
      inst.batch.encoded[t] =
          rng.uniform(inst.grid.a + 0.5 * inst.grid.bin_width,
                      inst.grid.right_end() - 0.5 * inst.grid.bin_width);
    } else if (inst.grid.kind == GridKind::Joint) {
      inst.batch.encoded[t] = inst.grid.a;
    } else {
      inst.batch.encoded[t] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  inst.weights.voiced = static_cast<double>(voiced_count) / frames;
  inst.weights.unvoiced = 1.0 - inst.weights.voiced;
  inst.hidden_sizes = {5, 4};
  return inst;
}

double grad_check(const TrainConfig& config, const TinyInstance& instance) {
  ModelParams params = init_params(config.method, static_cast<int>(instance.batch.features.cols()),
                                   instance.hidden_sizes, instance.grid.num_bins, config.seed);

  // Freeze the targets at the base parameters; the loss treats them as
  // constants, so the oracle must too.
  Eigen::MatrixXd frozen;
  const Eigen::MatrixXd* frozen_ptr = nullptr;
  if (uses_histogram(config.method)) {
    frozen = build_targets(params, instance.batch, instance.grid, config);
    frozen_ptr = &frozen;
  }

  ModelParams analytic;
  method_loss(params, instance.batch, instance.grid, instance.weights, config, frozen_ptr,
              &analytic);

  std::vector<double*> param_ptrs;
  std::vector<const double*> grad_ptrs;
  visit_layers(params, [&](DenseLayer& layer) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) param_ptrs.push_back(layer.weight.data() + i);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) param_ptrs.push_back(layer.bias.data() + i);
  });
  visit_layers(analytic, [&](const DenseLayer& layer) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) grad_ptrs.push_back(layer.weight.data() + i);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) grad_ptrs.push_back(layer.bias.data() + i);
  });

  double max_rel_error = 0.0;
  for (std::size_t i = 0; i < param_ptrs.size(); ++i) {
    double& theta = *param_ptrs[i];
    const double saved = theta;
    const double h = 1e-5 * std::max(1.0, std::fabs(saved));
    theta = saved + h;
    const double plus =
        method_loss(params, instance.batch, instance.grid, instance.weights, config, frozen_ptr)
            .total;
    theta = saved - h;
    const double minus =
        method_loss(params, instance.batch, instance.grid, instance.weights, config, frozen_ptr)
            .total;
    theta = saved;
    const double fd = (plus - minus) / (2.0 * h);
    const double analytic_g = *grad_ptrs[i];
    const double denom = std::max({std::fabs(fd), std::fabs(analytic_g), 1e-6});
    max_rel_error = std::max(max_rel_error, std::fabs(fd - analytic_g) / denom);
  }
  return max_rel_error;
}

}  // namespace melohist
