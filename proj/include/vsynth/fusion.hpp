#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vsynth/volume.hpp"

namespace vsynth {

using Origin3 = std::array<std::size_t, 3>;

struct WindowSpec {
  std::size_t patch_size = 128;
  std::size_t step = 32;

  void validate() const;
};

/// w[i] = sin(pi/8 + i / (P - 1) * 6pi/8), i in [0, P).
std::vector<double> weight_profile(const WindowSpec& spec);

/// Window origins along one axis: multiples of step, plus a last window
/// clamped to end at the boundary. Throws DimensionError if extent < P.
std::vector<std::size_t> window_origins(std::size_t extent, const WindowSpec& spec);

/// Cartesian product of per-axis origins, x fastest.
std::vector<Origin3> window_lattice(const Shape3& shape, const WindowSpec& spec);

/// Streaming weighted-average accumulator. Only the sum, weight and count
/// lattices are held; patches can be discarded after add().
class PatchFuser {
 public:
  PatchFuser(const Shape3& shape, const WindowSpec& spec, double voxel_size_um = 20.0);

  /// patch holds P^3 values, x fastest. Throws DimensionError if the patch
  /// has the wrong size or leaves the volume, DomainError for values outside
  /// [0, 1].
  void add(const Origin3& origin, std::span<const float> patch);

  /// Weighted mean per voxel. Throws CoverageError naming the bounding box
  /// of voxels that received no contribution.
  IntensityVolume finalize() const;

  std::uint16_t count(std::size_t x, std::size_t y, std::size_t z) const;
  std::uint16_t max_count() const;
  std::size_t patches_added() const { return patches_; }
  const Shape3& shape() const { return shape_; }
  const WindowSpec& spec() const { return spec_; }

 private:
  Shape3 shape_;
  WindowSpec spec_;
  double voxel_size_um_;
  std::vector<double> profile_;
  std::vector<double> sum_;
  std::vector<double> weight_;
  std::vector<std::uint16_t> count_;
  std::size_t patches_ = 0;
};

struct PatchRecord {
  Origin3 origin{0, 0, 0};
  std::vector<float> values;
};

IntensityVolume fuse_patches(std::span<const PatchRecord> patches, const Shape3& shape,
                             const WindowSpec& spec = {}, double voxel_size_um = 20.0);

/// 1 where value >= threshold, else 0.
LabelVolume threshold_mask(const IntensityVolume& probs, double threshold = 0.5);

}  // namespace vsynth
