#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vsynth/io/config.hpp"

namespace vsynth::io {

inline constexpr const char* kEngineName = "vsynth";
inline constexpr const char* kPrngName = "pcg64 (pcg_setseq_128 xsl-rr 128/64, splitmix64 seeding)";

std::string engine_version();

struct PatchEntry {
  std::size_t index = 0;
  std::uint64_t label_seed = 0;
  std::uint64_t image_seed = 0;
  std::string label_path;  // relative to the manifest directory; empty if absent
  std::string image_path;
  std::string label_checksum;
  std::string image_checksum;
  std::size_t tree_count = 0;
  std::size_t branch_count = 0;

  bool operator==(const PatchEntry&) const = default;
};

struct DatasetManifest {
  std::string engine = kEngineName;
  std::string engine_version;
  std::uint64_t global_seed = 0;
  std::string prng = kPrngName;
  std::string checksum_algorithm;
  SynthConfig config;
  std::vector<PatchEntry> patches;

  bool operator==(const DatasetManifest&) const = default;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Writes to a temporary sibling and renames it into place.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
/// Throws IoError if unreadable, ConfigError if malformed.
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace vsynth::io
