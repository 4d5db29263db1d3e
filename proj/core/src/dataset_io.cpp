#include "melohist/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace melohist {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

}  // namespace

std::vector<FrameLabel> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open label file");
  std::vector<FrameLabel> labels;
  std::string line;
  double prev_time = -1.0;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    double time = 0.0;
    double freq = 0.0;
    if (!(ss >> time >> freq)) fail(path, "malformed row " + std::to_string(row));
    std::string rest;
    if (ss >> rest) fail(path, "trailing fields in row " + std::to_string(row));
    if (time <= prev_time) fail(path, "non-monotone time in row " + std::to_string(row));
    if (freq < 0.0) fail(path, "negative frequency in row " + std::to_string(row));
    if (freq > 0.0 && (freq < kFreqMinHz - 1e-6 || freq > kFreqMaxHz + 1e-6)) {
      fail(path, "voiced frequency outside the supported range in row " + std::to_string(row));
    }
    prev_time = time;
    labels.push_back(FrameLabel{freq});
  }
  return labels;
}

void write_labels(const std::filesystem::path& path, std::span<const FrameLabel> labels) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot write label file");
  char buf[64];
  for (std::size_t t = 0; t < labels.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f\n", static_cast<double>(t) * 0.010,
                  labels[t].freq_hz);
    out << buf;
  }
  if (!out) fail(path, "write failed");
}

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void write_wav(const std::filesystem::path& path, std::span<const double> samples) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);      // PCM
  put_u16(out, 1);      // mono
  put_u32(out, 16000);  // sample rate
  put_u32(out, 16000 * 2);
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits per sample
  out += "data";
  put_u32(out, data_bytes);
  for (double s : samples) {
    const double clamped = std::max(-1.0, std::min(1.0, s));
    const auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) fail(path, "cannot write wav file");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) fail(path, "write failed");
}

std::vector<double> read_wav(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(path, "cannot open wav file");
  std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    fail(path, "not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::vector<double> samples;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = get_u32(p + pos + 4);
    const bool is_fmt = std::memcmp(p + pos, "fmt ", 4) == 0;
    const bool is_data = std::memcmp(p + pos, "data", 4) == 0;
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) fail(path, "truncated chunk");
    if (is_fmt) {
      if (chunk_size < 16) fail(path, "short fmt chunk");
      if (get_u16(p + body) != 1) fail(path, "only PCM wavs are supported");
      if (get_u16(p + body + 2) != 1) fail(path, "only mono wavs are supported");
      if (get_u32(p + body + 4) != 16000) fail(path, "only 16 kHz wavs are supported");
      if (get_u16(p + body + 14) != 16) fail(path, "only 16-bit wavs are supported");
      have_fmt = true;
    } else if (is_data) {
      if (!have_fmt) fail(path, "data chunk before fmt");
      samples.reserve(chunk_size / 2);
      for (std::size_t i = 0; i + 1 < chunk_size; i += 2) {
        const auto v = static_cast<std::int16_t>(get_u16(p + body + i));
        samples.push_back(static_cast<double>(v) / 32767.0);
      }
      return samples;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  fail(path, "no data chunk found");
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open manifest");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(path, std::string("invalid JSON: ") + e.what());
  }
  Manifest m;
  m.schema_version = j.at("schema_version").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("config")) m.config_echo = j["config"].dump();
  for (const auto& c : j.at("clips")) {
    ManifestEntry e;
    e.id = c.at("id").get<std::string>();
    e.audio = c.at("audio").get<std::string>();
    e.labels = c.at("labels").get<std::string>();
    e.split = c.at("split").get<std::string>();
    m.clips.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  nlohmann::json j;
  j["schema_version"] = manifest.schema_version;
  j["seed"] = manifest.seed;
  if (!manifest.config_echo.empty()) j["config"] = nlohmann::json::parse(manifest.config_echo);
  nlohmann::json clips = nlohmann::json::array();
  for (const ManifestEntry& e : manifest.clips) {
    clips.push_back({{"id", e.id}, {"audio", e.audio}, {"labels", e.labels}, {"split", e.split}});
  }
  j["clips"] = clips;
  std::ofstream out(path);
  if (!out) fail(path, "cannot write manifest");
  out << j.dump(2) << "\n";
  if (!out) fail(path, "write failed");
}

}  // namespace melohist
