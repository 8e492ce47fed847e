#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "vsynth/volume.hpp"

namespace vsynth::io {

inline constexpr const char* kChecksumAlgorithm = "fnv1a-64";

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::string hex64(std::uint64_t v);

/// Checksum of the voxel payload as stored on disk (compression-independent).
std::string payload_checksum(const LabelVolume& v);
std::string payload_checksum(const IntensityVolume& v);
std::string file_payload_checksum(const std::filesystem::path& path);

}  // namespace vsynth::io
