#pragma once

#include <filesystem>

#include "melohist/model.hpp"
#include "melohist/spectrogram.hpp"

namespace melohist {

// Versioned JSON container for a trained model: the training configuration,
// the feature standardization statistics, and every parameter tensor.
// save -> load -> save reproduces the file byte for byte.
struct Checkpoint {
  int schema_version = 1;
  TrainConfig config;
  FeatureStats stats;
  ModelParams params;
  int epochs_completed = 0;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace melohist
