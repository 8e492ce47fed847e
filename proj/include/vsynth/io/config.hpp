#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsynth/imagesynth.hpp"
#include "vsynth/vesselsynth.hpp"

namespace vsynth::io {

struct GenerationSettings {
  std::uint64_t seed = 0;
  std::size_t n = 1;
  std::size_t workers = 0;  // 0: available parallelism
  bool compress = false;    // .nii.gz instead of .nii

  bool operator==(const GenerationSettings&) const = default;
};

struct SynthConfig {
  LabelSynthParams labels;
  ImageSynthParams images;
  GenerationSettings generation;

  bool operator==(const SynthConfig&) const = default;
};

/// "A".."H" (also "ablate-A".."ablate-H"), "simple", "default".
std::vector<std::string> preset_names();

/// Throws ConfigError for unknown names.
///   A..H toggle (banding, vessel texture, spheres):
///   A 111, B 110, C 101, D 011, E 010, F 001, G 100, H 000.
///   simple: halves every lognormal label variance and every uniform label
///   upper bound (never below the lower bound).
void apply_preset(SynthConfig& config, std::string_view name);

nlohmann::json dist_to_json(const DistSpec& d);
DistSpec dist_from_json(const nlohmann::json& j, std::string_view key);

nlohmann::json to_json(const SynthConfig& config);

/// Document layout: {"preset": str, "labels": {...}, "images": {...},
/// "generation": {...}}, every key optional. The preset is applied to the
/// defaults first, explicit keys override it. `preset_override` replaces the
/// document's preset. Unknown keys, wrong types and reversed uniform bounds
/// throw ConfigError; a reversed sphere_freq is swapped with a warning.
SynthConfig config_from_json(const nlohmann::json& doc,
                             const std::optional<std::string>& preset_override = std::nullopt);

SynthConfig parse_config_text(std::string_view text,
                              const std::optional<std::string>& preset_override = std::nullopt);
SynthConfig parse_config(const std::filesystem::path& path,
                         const std::optional<std::string>& preset_override = std::nullopt);

/// Pretty-printed JSON with every key present; parse_config_text inverts it.
std::string serialize_config(const SynthConfig& config);

}  // namespace vsynth::io
