#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vsynth/volume.hpp"

namespace vsynth::io {

/// NIfTI-1 datatype codes understood by the reader.
enum class DataType : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
  UInt16 = 512,
};

std::size_t bytes_per_voxel(DataType t);

enum class ValueKind { Labels, Intensity };

struct VolumeHeader {
  Shape3 shape{0, 0, 0};
  double voxel_size_um = 20.0;
  DataType datatype = DataType::Int32;
  std::array<double, 16> affine{};  // row-major 4x4, voxel -> mm
  double scl_slope = 0.0;
  double scl_inter = 0.0;

  ValueKind kind() const;
};

/// Diagonal voxel -> mm affine for isotropic voxels.
std::array<double, 16> diagonal_affine(double voxel_size_um);

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kVoxOffset = 352;

/// Whole-file image (header, 4 extension bytes, payload) as little-endian bytes.
std::vector<std::uint8_t> encode(const LabelVolume& v);
std::vector<std::uint8_t> encode(const IntensityVolume& v);

struct Decoded {
  VolumeHeader header;
  std::vector<std::uint8_t> payload;  // little-endian voxel bytes, x fastest
};

/// Parses a complete file image. Throws FormatError for malformed fields and
/// LengthError when the payload is shorter than the header declares.
Decoded decode(const std::vector<std::uint8_t>& bytes);

/// Files ending in .gz are gzip-compressed. Throws IoError on filesystem failure.
void write_volume(const std::filesystem::path& path, const LabelVolume& v);
void write_volume(const std::filesystem::path& path, const IntensityVolume& v);

Decoded read_raw(const std::filesystem::path& path);
VolumeHeader read_header(const std::filesystem::path& path);

/// Integer datatypes are copied; float datatypes must hold integral values.
LabelVolume read_labels(const std::filesystem::path& path);
/// Any supported datatype, converted to float with scl_slope / scl_inter applied.
IntensityVolume read_intensity(const std::filesystem::path& path);

LabelVolume to_labels(const Decoded& d);
IntensityVolume to_intensity(const Decoded& d);

/// Raw voxel payload of a volume (what write_volume stores after the header).
std::vector<std::uint8_t> payload_bytes(const LabelVolume& v);
std::vector<std::uint8_t> payload_bytes(const IntensityVolume& v);

bool is_gzip_path(const std::filesystem::path& path);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> gzip_decompress(const std::vector<std::uint8_t>& bytes);

}  // namespace vsynth::io
