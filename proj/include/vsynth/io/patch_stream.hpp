#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vsynth/fusion.hpp"

namespace vsynth::io {

// Stream protocol, one record per patch until EOF:
//   int32 x, int32 y, int32 z   (little-endian origin, voxels)
//   float32[P^3]                (little-endian, x fastest)

void write_patch_record(std::ostream& out, const Origin3& origin, std::span<const float> values);

class PatchStreamReader {
 public:
  PatchStreamReader(std::istream& in, std::size_t patch_size);

  /// Next record, or nullopt at a clean EOF. A record cut short throws
  /// LengthError; a negative origin throws DimensionError.
  std::optional<PatchRecord> next();

 private:
  std::istream& in_;
  std::size_t patch_size_;
  std::size_t records_ = 0;
};

/// "patch_<x>_<y>_<z>.nii" (".nii.gz" when compressed).
std::string patch_file_name(const Origin3& origin, bool compress = false);
std::optional<Origin3> parse_patch_file_name(std::string_view name);

/// Patch files of a directory sorted by origin (z, then y, then x).
std::vector<std::pair<Origin3, std::filesystem::path>> list_patch_files(const std::filesystem::path& dir);

}  // namespace vsynth::io
