#include "vsynth/io/checksum.hpp"

#include <fmt/format.h>

#include "vsynth/io/nifti.hpp"

namespace vsynth::io {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string payload_checksum(const LabelVolume& v) { return hex64(fnv1a64(payload_bytes(v))); }
std::string payload_checksum(const IntensityVolume& v) { return hex64(fnv1a64(payload_bytes(v))); }

std::string file_payload_checksum(const std::filesystem::path& path) { return hex64(fnv1a64(read_raw(path).payload)); }

}  // namespace vsynth::io
