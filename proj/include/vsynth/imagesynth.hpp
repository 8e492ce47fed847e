#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vsynth/geometry.hpp"
#include "vsynth/sampling.hpp"
#include "vsynth/volume.hpp"

namespace vsynth {

/// Multiplier given to vessel voxels when intra-vessel texture is disabled
/// (midpoint of the textured range [0, 0.5]).
inline constexpr float kFlatVesselMultiplier = 0.25f;

struct ImageSynthParams {
  DistSpec n_parenchyma_maps = DistSpec::uniform_int(2, 10);
  DistSpec spline_ctrl_per_dim = DistSpec::uniform_int(3, 10);
  double parenchyma_intensity_var = 0.04;
  DistSpec vessel_texture_mean = DistSpec::uniform(0.7, 1.0);
  double vessel_texture_var = 0.64;
  DistSpec speckle_sd = DistSpec::uniform(0.2, 0.8);
  DistSpec band_width = DistSpec::uniform_int(2, 32);
  DistSpec band_factor = DistSpec::uniform(0.5, 1.5);
  DistSpec sphere_radius = DistSpec::uniform_int(2, 8);
  DistSpec sphere_freq = DistSpec::uniform(1e-5, 1e-3);  // spheres per voxel
  DistSpec sphere_intensity = DistSpec::uniform(0.1, 2.0);
  bool enable_banding = true;
  bool enable_vessel_texture = true;
  bool enable_spheres = true;

  void validate() const;
  bool operator==(const ImageSynthParams&) const = default;
};

/// c x c x c control values (x fastest) of one smooth field.
struct ControlGrid {
  std::size_t size = 0;
  std::vector<double> values;
};

/// Separable natural-cubic upsampling of a control grid onto the lattice.
std::vector<float> smooth_field(const Shape3& shape, const ControlGrid& grid);

/// Voxelwise argmax over smooth fields; labels are 1..K, ties to the lowest index.
LabelVolume argmax_labels(const Shape3& shape, std::span<const ControlGrid> grids,
                          double voxel_size_um = 20.0);

/// K ~ n_parenchyma_maps fields on a c^3 grid (c ~ spline_ctrl_per_dim) with
/// standard normal control values, reduced by argmax.
LabelVolume synth_parenchyma_labels(const Shape3& shape, const ImageSynthParams& params, Rng& rng,
                                    double voxel_size_um = 20.0);

/// Maps label i to intensities[i - 1], then min-max normalizes to [0, 1].
/// A constant result becomes all zeros.
IntensityVolume assign_and_normalize(const LabelVolume& labels, std::span<const double> intensities);

/// Draws N(i, parenchyma_intensity_var) per label i and normalizes to [0, 1].
IntensityVolume parenchyma_intensity(const LabelVolume& labels, const ImageSynthParams& params,
                                     Rng& rng);

/// Multiplier field: 1 outside vessels, textured values in [0, 0.5] inside.
/// With texture disabled every vessel voxel gets kFlatVesselMultiplier.
IntensityVolume vessel_texture(const LabelVolume& vessel_mask, const ImageSynthParams& params,
                               Rng& rng);

IntensityVolume fuse(const IntensityVolume& parenchyma, const IntensityVolume& vessel_multiplier);

/// Multiplies every voxel by an independent Gamma(mean 1, sd) draw.
void apply_speckle(IntensityVolume& image, double sd, Rng& rng);
/// sd ~ params.speckle_sd, then apply_speckle. Returns the sd used.
double speckle(IntensityVolume& image, const ImageSynthParams& params, Rng& rng);

struct BandingRecord {
  int axis = 0;
  std::vector<std::size_t> widths;  // tiles the axis extent exactly
  std::vector<double> factors;
};

BandingRecord sample_banding(const Shape3& shape, const ImageSynthParams& params, Rng& rng);
void apply_banding(IntensityVolume& image, const BandingRecord& record);
BandingRecord banding(IntensityVolume& image, const ImageSynthParams& params, Rng& rng);

struct Sphere {
  Vec3 center;
  int radius = 0;
  double intensity = 1.0;
};

/// round(freq * voxels) spheres with uniform centers.
std::vector<Sphere> sample_spheres(const Shape3& shape, const ImageSynthParams& params, Rng& rng);
/// Multiplies voxels whose centers lie within each sphere by its intensity.
/// Returns the number of voxel updates.
std::size_t apply_spheres(IntensityVolume& image, std::span<const Sphere> spheres);
std::vector<Sphere> spheres(IntensityVolume& image, const ImageSynthParams& params, Rng& rng);

/// Min-max normalization to [lo, hi]; constant input maps to lo.
void normalize_minmax(IntensityVolume& image, float lo = 0.0f, float hi = 1.0f);

/// Stage tags for per-stage sub-seeds.
enum class ImageStage : std::uint64_t { Parenchyma = 1, Texture = 2, Speckle = 3, Banding = 4, Spheres = 5 };

/// Full label-to-image pipeline: parenchyma labels, parenchyma intensity,
/// vessel texture, fuse, speckle, banding, spheres, then normalization to
/// [0, 1]. Every stage draws from derive_seed(seed, stage), so toggling a
/// stage leaves the others untouched.
IntensityVolume synthesize_image(const LabelVolume& labels, const ImageSynthParams& params,
                                 std::uint64_t seed);

}  // namespace vsynth
