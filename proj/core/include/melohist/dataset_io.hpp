#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "melohist/pitch_grid.hpp"

namespace melohist {

// Two-column label files: time_seconds frequency_hz, one row per 10 ms frame,
// 0 = unvoiced. Round trip is exact to 6 decimal places.
std::vector<FrameLabel> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, std::span<const FrameLabel> labels);

// Mono 16 kHz PCM16 WAV.
std::vector<double> read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, std::span<const double> samples);

struct ManifestEntry {
  std::string id;
  std::string audio;   // relative to the manifest directory
  std::string labels;  // relative to the manifest directory
  std::string split;   // "train" or "test"
};

struct Manifest {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::string config_echo;  // generating configuration, JSON
  std::vector<ManifestEntry> clips;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace melohist
