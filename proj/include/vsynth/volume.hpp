#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vsynth/errors.hpp"

namespace vsynth {

using Shape3 = std::array<std::size_t, 3>;

inline std::size_t voxel_count(const Shape3& s) { return s[0] * s[1] * s[2]; }

inline std::string shape_string(const Shape3& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]);
}

/// Dense 3D lattice, x fastest (NIfTI order). Voxel (x, y, z) has its center
/// at coordinates (x, y, z) in voxel units.
template <class T>
struct Volume {
  Shape3 shape{0, 0, 0};
  double voxel_size_um = 20.0;
  std::vector<T> voxels;

  Volume() = default;
  explicit Volume(Shape3 s, double voxel_um = 20.0, T fill = T{})
      : shape(s), voxel_size_um(voxel_um), voxels(voxel_count(s), fill) {
    for (std::size_t d : s) {
      if (d == 0) throw DimensionError("volume extents must be positive");
    }
  }

  std::size_t size() const { return voxels.size(); }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + shape[0] * (y + shape[1] * z);
  }
  T& at(std::size_t x, std::size_t y, std::size_t z) { return voxels[index(x, y, z)]; }
  const T& at(std::size_t x, std::size_t y, std::size_t z) const { return voxels[index(x, y, z)]; }

  bool operator==(const Volume&) const = default;
};

/// 0 = background, > 0 = branch id or class id.
using LabelVolume = Volume<std::int32_t>;
using IntensityVolume = Volume<float>;

template <class A, class B>
void require_same_shape(const Volume<A>& a, const Volume<B>& b, const char* what) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape) +
                         " vs " + shape_string(b.shape));
  }
}

}  // namespace vsynth
