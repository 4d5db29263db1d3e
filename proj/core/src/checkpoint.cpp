#include "melohist/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace melohist {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::runtime_error("checkpoint: ragged matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(c).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

json layer_to_json(const DenseLayer& layer) {
  if (layer.empty()) return nullptr;
  return json{{"weight", matrix_to_json(layer.weight)}, {"bias", vector_to_json(layer.bias)}};
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer layer;
  if (j.is_null()) return layer;
  layer.weight = matrix_from_json(j.at("weight"));
  layer.bias = vector_from_json(j.at("bias"));
  return layer;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  json j;
  j["schema_version"] = checkpoint.schema_version;
  const TrainConfig& c = checkpoint.config;
  j["config"] = {{"method", to_string(c.method)},
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
  j["epochs_completed"] = checkpoint.epochs_completed;
  j["feature_stats"] = {{"mean", vector_to_json(checkpoint.stats.mean)},
                        {"stdev", vector_to_json(checkpoint.stats.stdev)}};
  json hidden = json::array();
  for (const DenseLayer& layer : checkpoint.params.hidden) hidden.push_back(layer_to_json(layer));
  j["params"] = {{"method", to_string(checkpoint.params.method)},
                 {"hidden", hidden},
                 {"pitch_head", layer_to_json(checkpoint.params.pitch_head)},
                 {"voicing_head", layer_to_json(checkpoint.params.voicing_head)},
                 {"mean_head", layer_to_json(checkpoint.params.mean_head)},
                 {"logvar_head", layer_to_json(checkpoint.params.logvar_head)}};

  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write checkpoint");
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open checkpoint");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
  }
  Checkpoint checkpoint;
  checkpoint.schema_version = j.at("schema_version").get<int>();
  if (checkpoint.schema_version != 1) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint schema");
  }
  const json& c = j.at("config");
  checkpoint.config.method = method_from_string(c.at("method").get<std::string>());
  checkpoint.config.learning_rate = c.at("learning_rate").get<double>();
  checkpoint.config.epochs = c.at("epochs").get<int>();
  checkpoint.config.seed = c.at("seed").get<std::uint64_t>();
  checkpoint.config.context_frames = c.at("context_frames").get<int>();
  checkpoint.config.hidden_sizes = c.at("hidden_sizes").get<std::vector<int>>();
  checkpoint.config.lambda = c.at("lambda").get<double>();
  checkpoint.config.sigma_floor = c.at("sigma_floor").get<double>();
  checkpoint.config.batch_size = c.at("batch_size").get<int>();
  checkpoint.config.n_mels = c.at("n_mels").get<int>();
  checkpoint.config.invert_class_weights = c.at("invert_class_weights").get<bool>();
  checkpoint.epochs_completed = j.at("epochs_completed").get<int>();
  checkpoint.stats.mean = vector_from_json(j.at("feature_stats").at("mean"));
  checkpoint.stats.stdev = vector_from_json(j.at("feature_stats").at("stdev"));
  const json& p = j.at("params");
  checkpoint.params.method = method_from_string(p.at("method").get<std::string>());
  for (const auto& layer : p.at("hidden")) {
    checkpoint.params.hidden.push_back(layer_from_json(layer));
  }
  checkpoint.params.pitch_head = layer_from_json(p.at("pitch_head"));
  checkpoint.params.voicing_head = layer_from_json(p.at("voicing_head"));
  checkpoint.params.mean_head = layer_from_json(p.at("mean_head"));
  checkpoint.params.logvar_head = layer_from_json(p.at("logvar_head"));
  return checkpoint;
}

}  // namespace melohist
