#include "vsynth/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "vsynth/errors.hpp"

namespace vsynth {

void WindowSpec::validate() const {
  if (patch_size < 2) throw DimensionError("patch size must be at least 2");
  if (step == 0 || step > patch_size) throw DimensionError("step must be in [1, patch size]");
}

std::vector<double> weight_profile(const WindowSpec& spec) {
  spec.validate();
  const double denom = static_cast<double>(spec.patch_size - 1);
  std::vector<double> w(spec.patch_size);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::sin(std::numbers::pi / 8.0 + static_cast<double>(i) / denom * (6.0 * std::numbers::pi / 8.0));
  }
  // The two halves agree up to rounding; mirror them so the profile is exactly symmetric.
  for (std::size_t i = 0; i < w.size() / 2; ++i) w[w.size() - 1 - i] = w[i];
  return w;
}

std::vector<std::size_t> window_origins(std::size_t extent, const WindowSpec& spec) {
  spec.validate();
  if (extent < spec.patch_size) {
    throw DimensionError("axis extent " + std::to_string(extent) + " is smaller than patch size " +
                         std::to_string(spec.patch_size));
  }
  std::vector<std::size_t> out;
  const std::size_t last = extent - spec.patch_size;
  for (std::size_t o = 0; o <= last; o += spec.step) out.push_back(o);
  if (out.back() != last) out.push_back(last);
  return out;
}

std::vector<Origin3> window_lattice(const Shape3& shape, const WindowSpec& spec) {
  const auto ox = window_origins(shape[0], spec);
  const auto oy = window_origins(shape[1], spec);
  const auto oz = window_origins(shape[2], spec);
  std::vector<Origin3> out;
  out.reserve(ox.size() * oy.size() * oz.size());
  for (std::size_t z : oz) {
    for (std::size_t y : oy) {
      for (std::size_t x : ox) out.push_back({x, y, z});
    }
  }
  return out;
}

PatchFuser::PatchFuser(const Shape3& shape, const WindowSpec& spec, double voxel_size_um)
    : shape_(shape), spec_(spec), voxel_size_um_(voxel_size_um), profile_(weight_profile(spec)) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("volume extents must be positive");
    if (d < spec.patch_size) {
      throw DimensionError("volume extent " + std::to_string(d) + " is smaller than the patch size " +
                           std::to_string(spec.patch_size));
    }
  }
  const std::size_t n = voxel_count(shape);
  sum_.assign(n, 0.0);
  weight_.assign(n, 0.0);
  count_.assign(n, 0);
}

void PatchFuser::add(const Origin3& origin, std::span<const float> patch) {
  const std::size_t p = spec_.patch_size;
  if (patch.size() != p * p * p) {
    throw DimensionError("patch has " + std::to_string(patch.size()) + " values, expected " + std::to_string(p * p * p));
  }
  for (int d = 0; d < 3; ++d) {
    if (origin[d] + p > shape_[d]) {
      throw DimensionError("patch at (" + std::to_string(origin[0]) + ", " + std::to_string(origin[1]) + ", " +
                           std::to_string(origin[2]) + ") extends past volume " + shape_string(shape_));
    }
  }
  for (float v : patch) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DomainError("patch value outside [0, 1]");
  }
  const std::size_t nx = shape_[0];
  const std::size_t ny = shape_[1];
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t j = 0; j < p; ++j) {
      const double wyz = profile_[j] * profile_[k];
      const std::size_t base = origin[0] + nx * ((origin[1] + j) + ny * (origin[2] + k));
      const float* src = &patch[p * (j + p * k)];
      for (std::size_t i = 0; i < p; ++i) {
        const double w = profile_[i] * wyz;
        sum_[base + i] += w * static_cast<double>(src[i]);
        weight_[base + i] += w;
        if (count_[base + i] < std::numeric_limits<std::uint16_t>::max()) ++count_[base + i];
      }
    }
  }
  ++patches_;
}

IntensityVolume PatchFuser::finalize() const {
  Shape3 lo{shape_[0], shape_[1], shape_[2]};
  Shape3 hi{0, 0, 0};
  std::size_t missing = 0;
  IntensityVolume out(shape_, voxel_size_um_, 0.0f);
  for (std::size_t z = 0; z < shape_[2]; ++z) {
    for (std::size_t y = 0; y < shape_[1]; ++y) {
      for (std::size_t x = 0; x < shape_[0]; ++x) {
        const std::size_t i = out.index(x, y, z);
        if (count_[i] == 0) {
          ++missing;
          const Shape3 v{x, y, z};
          for (int d = 0; d < 3; ++d) {
            lo[d] = std::min(lo[d], v[d]);
            hi[d] = std::max(hi[d], v[d]);
          }
          continue;
        }
        out.voxels[i] = static_cast<float>(sum_[i] / weight_[i]);
      }
    }
  }
  if (missing > 0) {
    throw CoverageError(std::to_string(missing) + " voxels uncovered within [" + std::to_string(lo[0]) + ".." +
                        std::to_string(hi[0]) + "] x [" + std::to_string(lo[1]) + ".." + std::to_string(hi[1]) +
                        "] x [" + std::to_string(lo[2]) + ".." + std::to_string(hi[2]) + "]");
  }
  return out;
}

std::uint16_t PatchFuser::count(std::size_t x, std::size_t y, std::size_t z) const {
  return count_[x + shape_[0] * (y + shape_[1] * z)];
}

std::uint16_t PatchFuser::max_count() const {
  return count_.empty() ? 0 : *std::max_element(count_.begin(), count_.end());
}

IntensityVolume fuse_patches(std::span<const PatchRecord> patches, const Shape3& shape, const WindowSpec& spec,
                             double voxel_size_um) {
  PatchFuser fuser(shape, spec, voxel_size_um);
  for (const PatchRecord& p : patches) fuser.add(p.origin, p.values);
  return fuser.finalize();
}

LabelVolume threshold_mask(const IntensityVolume& probs, double threshold) {
  LabelVolume out(probs.shape, probs.voxel_size_um, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) out.voxels[i] = probs.voxels[i] >= threshold ? 1 : 0;
  return out;
}

}  // namespace vsynth
