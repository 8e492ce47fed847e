#include "vsynth/imagesynth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vsynth/errors.hpp"
#include "vsynth/spline.hpp"

namespace vsynth {

namespace {

ControlGrid random_grid(std::size_t c, Rng& rng) {
  ControlGrid g{c, std::vector<double>(c * c * c)};
  for (double& v : g.values) v = rng.normal();
  return g;
}

std::vector<ControlGrid> random_grids(const ImageSynthParams& params, Rng& rng) {
  const auto k = static_cast<std::size_t>(std::max<std::int64_t>(1, sample_integer(params.n_parenchyma_maps, rng)));
  const auto c = static_cast<std::size_t>(std::max<std::int64_t>(1, sample_integer(params.spline_ctrl_per_dim, rng)));
  std::vector<ControlGrid> grids;
  grids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) grids.push_back(random_grid(c, rng));
  return grids;
}

}  // namespace

void ImageSynthParams::validate() const {
  for (const DistSpec* d : {&n_parenchyma_maps, &spline_ctrl_per_dim, &vessel_texture_mean, &speckle_sd,
                            &band_width, &band_factor, &sphere_radius, &sphere_freq, &sphere_intensity}) {
    d->validate();
  }
  if (!(parenchyma_intensity_var >= 0)) throw DomainError("parenchyma_intensity_var must be >= 0");
  if (!(vessel_texture_var >= 0)) throw DomainError("vessel_texture_var must be >= 0");
  if (speckle_sd.family == Family::UniformCont && speckle_sd.a < 0) {
    throw DomainError("speckle_sd must be non-negative");
  }
}

std::vector<float> smooth_field(const Shape3& shape, const ControlGrid& grid) {
  const std::size_t c = grid.size;
  if (c == 0 || grid.values.size() != c * c * c) throw DimensionError("control grid must hold c^3 values");
  const auto [nx, ny, nz] = shape;
  const std::vector<double> wx = cubic_upsampling_weights(c, nx);
  const std::vector<double> wy = cubic_upsampling_weights(c, ny);
  const std::vector<double> wz = cubic_upsampling_weights(c, nz);

  std::vector<double> t1(c * c * nx, 0.0);
  for (std::size_t row = 0; row < c * c; ++row) {
    const double* g = &grid.values[row * c];
    for (std::size_t x = 0; x < nx; ++x) {
      double acc = 0;
      for (std::size_t j = 0; j < c; ++j) acc += wx[x * c + j] * g[j];
      t1[row * nx + x] = acc;
    }
  }
  std::vector<double> t2(c * ny * nx, 0.0);
  for (std::size_t cz = 0; cz < c; ++cz) {
    for (std::size_t y = 0; y < ny; ++y) {
      double* dst = &t2[(cz * ny + y) * nx];
      for (std::size_t cy = 0; cy < c; ++cy) {
        const double w = wy[y * c + cy];
        const double* src = &t1[(cz * c + cy) * nx];
        for (std::size_t x = 0; x < nx; ++x) dst[x] += w * src[x];
      }
    }
  }
  const std::size_t plane = nx * ny;
  std::vector<float> out(plane * nz);
  std::vector<double> acc(plane);
  for (std::size_t z = 0; z < nz; ++z) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t cz = 0; cz < c; ++cz) {
      const double w = wz[z * c + cz];
      const double* src = &t2[cz * plane];
      for (std::size_t i = 0; i < plane; ++i) acc[i] += w * src[i];
    }
    std::transform(acc.begin(), acc.end(), out.begin() + static_cast<std::ptrdiff_t>(z * plane),
                   [](double v) { return static_cast<float>(v); });
  }
  return out;
}

LabelVolume argmax_labels(const Shape3& shape, std::span<const ControlGrid> grids, double voxel_size_um) {
  if (grids.empty()) throw DomainError("argmax_labels needs at least one field");
  LabelVolume labels(shape, voxel_size_um, 1);
  std::vector<float> best(labels.size(), -std::numeric_limits<float>::infinity());
  for (std::size_t k = 0; k < grids.size(); ++k) {
    const std::vector<float> field = smooth_field(shape, grids[k]);
    const auto id = static_cast<std::int32_t>(k + 1);
    for (std::size_t i = 0; i < field.size(); ++i) {
      if (field[i] > best[i]) {
        best[i] = field[i];
        labels.voxels[i] = id;
      }
    }
  }
  return labels;
}

LabelVolume synth_parenchyma_labels(const Shape3& shape, const ImageSynthParams& params, Rng& rng,
                                    double voxel_size_um) {
  const std::vector<ControlGrid> grids = random_grids(params, rng);
  return argmax_labels(shape, grids, voxel_size_um);
}

void normalize_minmax(IntensityVolume& image, float lo, float hi) {
  if (image.voxels.empty()) return;
  const auto [mn, mx] = std::minmax_element(image.voxels.begin(), image.voxels.end());
  const double vmin = *mn;
  const double vmax = *mx;
  if (!(vmax > vmin)) {
    std::fill(image.voxels.begin(), image.voxels.end(), lo);
    return;
  }
  const double scale = (static_cast<double>(hi) - lo) / (vmax - vmin);
  for (float& v : image.voxels) {
    v = static_cast<float>(lo + (static_cast<double>(v) - vmin) * scale);
  }
}

IntensityVolume assign_and_normalize(const LabelVolume& labels, std::span<const double> intensities) {
  IntensityVolume out(labels.shape, labels.voxel_size_um, 0.0f);
  const auto k = static_cast<std::int32_t>(intensities.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::int32_t l = labels.voxels[i];
    if (l < 1 || l > k) throw DomainError("parenchyma label " + std::to_string(l) + " has no intensity");
    out.voxels[i] = static_cast<float>(intensities[static_cast<std::size_t>(l - 1)]);
  }
  normalize_minmax(out);
  return out;
}

IntensityVolume parenchyma_intensity(const LabelVolume& labels, const ImageSynthParams& params, Rng& rng) {
  const std::int32_t k = labels.voxels.empty() ? 0 : *std::max_element(labels.voxels.begin(), labels.voxels.end());
  std::vector<double> intensities(static_cast<std::size_t>(std::max(k, 0)));
  for (std::int32_t i = 1; i <= k; ++i) {
    intensities[static_cast<std::size_t>(i - 1)] =
        sample(DistSpec::normal(static_cast<double>(i), params.parenchyma_intensity_var), rng);
  }
  return assign_and_normalize(labels, intensities);
}

IntensityVolume vessel_texture(const LabelVolume& vessel_mask, const ImageSynthParams& params, Rng& rng) {
  IntensityVolume out(vessel_mask.shape, vessel_mask.voxel_size_um, 1.0f);
  const bool any_vessel =
      std::any_of(vessel_mask.voxels.begin(), vessel_mask.voxels.end(), [](std::int32_t v) { return v > 0; });
  if (!any_vessel) return out;
  if (!params.enable_vessel_texture) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (vessel_mask.voxels[i] > 0) out.voxels[i] = kFlatVesselMultiplier;
    }
    return out;
  }

  const std::vector<ControlGrid> grids = random_grids(params, rng);
  const LabelVolume classes = argmax_labels(vessel_mask.shape, grids, vessel_mask.voxel_size_um);
  std::vector<double> means(grids.size());
  for (double& m : means) m = sample(params.vessel_texture_mean, rng);
  const double sd = std::sqrt(params.vessel_texture_var);

  std::vector<double> raw;
  raw.reserve(out.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (vessel_mask.voxels[i] <= 0) continue;
    raw.push_back(means[static_cast<std::size_t>(classes.voxels[i] - 1)] + sd * rng.normal());
  }
  const auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
  const double vmin = *mn;
  const double span = *mx - vmin;
  std::size_t j = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (vessel_mask.voxels[i] <= 0) continue;
    // A single distinct value has no range to stretch; use the midpoint.
    out.voxels[i] = span > 0 ? static_cast<float>(0.5 * (raw[j] - vmin) / span) : kFlatVesselMultiplier;
    ++j;
  }
  return out;
}

IntensityVolume fuse(const IntensityVolume& parenchyma, const IntensityVolume& vessel_multiplier) {
  require_same_shape(parenchyma, vessel_multiplier, "fuse");
  IntensityVolume out = parenchyma;
  for (std::size_t i = 0; i < out.size(); ++i) out.voxels[i] *= vessel_multiplier.voxels[i];
  return out;
}

void apply_speckle(IntensityVolume& image, double sd, Rng& rng) {
  if (!(sd >= 0)) throw DomainError("speckle sd must be non-negative");
  if (sd == 0) return;
  const double shape = 1.0 / (sd * sd);
  const double scale = sd * sd;
  for (float& v : image.voxels) v = static_cast<float>(v * rng.gamma_unit_scale(shape) * scale);
}

double speckle(IntensityVolume& image, const ImageSynthParams& params, Rng& rng) {
  const double sd = sample(params.speckle_sd, rng);
  apply_speckle(image, sd, rng);
  return sd;
}

BandingRecord sample_banding(const Shape3& shape, const ImageSynthParams& params, Rng& rng) {
  BandingRecord rec;
  rec.axis = static_cast<int>(rng.uniform_int(0, 2));
  const std::size_t extent = shape[static_cast<std::size_t>(rec.axis)];
  std::size_t covered = 0;
  while (covered < extent) {
    auto w = static_cast<std::size_t>(std::max<std::int64_t>(1, sample_integer(params.band_width, rng)));
    w = std::min(w, extent - covered);
    rec.widths.push_back(w);
    rec.factors.push_back(sample(params.band_factor, rng));
    covered += w;
  }
  return rec;
}

void apply_banding(IntensityVolume& image, const BandingRecord& record) {
  if (record.axis < 0 || record.axis > 2) throw DomainError("banding axis must be 0, 1 or 2");
  if (record.widths.size() != record.factors.size()) throw DimensionError("banding record is inconsistent");
  const std::size_t extent = image.shape[static_cast<std::size_t>(record.axis)];
  std::vector<float> per_slice;
  per_slice.reserve(extent);
  for (std::size_t b = 0; b < record.widths.size(); ++b) {
    per_slice.insert(per_slice.end(), record.widths[b], static_cast<float>(record.factors[b]));
  }
  if (per_slice.size() != extent) throw DimensionError("band widths do not tile the axis");
  const auto [nx, ny, nz] = image.shape;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      float* row = &image.voxels[image.index(0, y, z)];
      if (record.axis == 0) {
        for (std::size_t x = 0; x < nx; ++x) row[x] *= per_slice[x];
      } else {
        const float f = per_slice[record.axis == 1 ? y : z];
        for (std::size_t x = 0; x < nx; ++x) row[x] *= f;
      }
    }
  }
}

BandingRecord banding(IntensityVolume& image, const ImageSynthParams& params, Rng& rng) {
  BandingRecord rec = sample_banding(image.shape, params, rng);
  apply_banding(image, rec);
  return rec;
}

std::vector<Sphere> sample_spheres(const Shape3& shape, const ImageSynthParams& params, Rng& rng) {
  const double freq = sample(params.sphere_freq, rng);
  const double expected = freq * static_cast<double>(voxel_count(shape));
  const auto count = expected > 0 ? static_cast<std::size_t>(std::llround(expected)) : 0;
  std::vector<Sphere> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sphere s;
    for (int d = 0; d < 3; ++d) {
      s.center[d] = static_cast<double>(shape[static_cast<std::size_t>(d)] - 1) * rng.uniform01();
    }
    s.radius = static_cast<int>(std::max<std::int64_t>(0, sample_integer(params.sphere_radius, rng)));
    s.intensity = sample(params.sphere_intensity, rng);
    out.push_back(s);
  }
  return out;
}

std::size_t apply_spheres(IntensityVolume& image, std::span<const Sphere> spheres) {
  std::size_t touched = 0;
  for (const Sphere& s : spheres) {
    const double r2 = static_cast<double>(s.radius) * s.radius;
    std::array<long, 3> lo{};
    std::array<long, 3> hi{};
    for (int d = 0; d < 3; ++d) {
      const auto n = static_cast<long>(image.shape[static_cast<std::size_t>(d)]);
      lo[d] = std::max(0L, static_cast<long>(std::ceil(s.center[d] - s.radius)));
      hi[d] = std::min(n - 1, static_cast<long>(std::floor(s.center[d] + s.radius)));
    }
    const auto f = static_cast<float>(s.intensity);
    for (long z = lo[2]; z <= hi[2]; ++z) {
      for (long y = lo[1]; y <= hi[1]; ++y) {
        for (long x = lo[0]; x <= hi[0]; ++x) {
          const Vec3 p(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
          if ((p - s.center).squaredNorm() > r2) continue;
          image.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z)) *= f;
          ++touched;
        }
      }
    }
  }
  return touched;
}

std::vector<Sphere> spheres(IntensityVolume& image, const ImageSynthParams& params, Rng& rng) {
  std::vector<Sphere> s = sample_spheres(image.shape, params, rng);
  apply_spheres(image, s);
  return s;
}

IntensityVolume synthesize_image(const LabelVolume& labels, const ImageSynthParams& params, std::uint64_t seed) {
  params.validate();
  auto stage_rng = [seed](ImageStage stage) { return Rng(derive_seed(seed, static_cast<std::uint64_t>(stage))); };

  Rng parenchyma_rng = stage_rng(ImageStage::Parenchyma);
  const LabelVolume tissue = synth_parenchyma_labels(labels.shape, params, parenchyma_rng, labels.voxel_size_um);
  const IntensityVolume parenchyma = parenchyma_intensity(tissue, params, parenchyma_rng);

  Rng texture_rng = stage_rng(ImageStage::Texture);
  const IntensityVolume multiplier = vessel_texture(labels, params, texture_rng);
  IntensityVolume image = fuse(parenchyma, multiplier);

  Rng speckle_rng = stage_rng(ImageStage::Speckle);
  speckle(image, params, speckle_rng);
  if (params.enable_banding) {
    Rng rng = stage_rng(ImageStage::Banding);
    banding(image, params, rng);
  }
  if (params.enable_spheres) {
    Rng rng = stage_rng(ImageStage::Spheres);
    spheres(image, params, rng);
  }
  normalize_minmax(image);
  return image;
}

}  // namespace vsynth
