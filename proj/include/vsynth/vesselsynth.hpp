#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vsynth/geometry.hpp"
#include "vsynth/sampling.hpp"
#include "vsynth/volume.hpp"

namespace vsynth {

/// Smallest branch radius in voxels; thinner draws are clamped up to it.
inline constexpr double kMinRadiusVoxels = 0.25;
/// Root endpoints are drawn from the volume grown by this fraction per side.
inline constexpr double kRootPadding = 0.2;
/// Chord length (voxels) per intermediate control point.
inline constexpr double kChordPerControlPoint = 16.0;

struct LabelSynthParams {
  DistSpec tree_density = DistSpec::uniform(0.1, 0.2);  // trees / mm^3
  DistSpec children_per_spline = DistSpec::uniform_int(1, 7);
  DistSpec max_tree_depth = DistSpec::uniform_int(1, 7);
  DistSpec tortuosity = DistSpec::uniform(1, 5);
  /// Root radius, in units of root_radius_unit_mm.
  DistSpec root_radius = DistSpec::lognormal(-1.0, 0.017);
  DistSpec child_radius_factor = DistSpec::lognormal(-1.0 / 3.0, 0.064);
  DistSpec radius_fluctuation = DistSpec::lognormal(-0.0085, 0.017);
  /// Child chord length as a fraction of the parent chord.
  DistSpec child_length_factor = DistSpec::uniform(0.25, 0.75);
  Shape3 volume_shape{128, 128, 128};
  double voxel_size_um = 20.0;
  /// Millimetres per unit of root_radius draws (1.0: draws are in mm).
  double root_radius_unit_mm = 1.0;

  void validate() const;
  bool operator==(const LabelSynthParams&) const = default;
};

/// Physical volume of the lattice in mm^3.
double volume_mm3(const LabelSynthParams& params);

struct Branch {
  Spline3D curve;
  std::int32_t parent = 0;  // 0 for the root
  int depth = 0;
  double target_tortuosity = 1.0;
  double base_radius = 0;  // voxels, before fluctuation
  bool radius_clamped = false;

  std::int32_t id() const { return curve.branch_id(); }
};

/// Rooted tree of branches in creation order; every parent precedes its children.
struct VesselTree {
  std::vector<Branch> branches;
  int depth_bound = 1;

  std::size_t size() const { return branches.size(); }
  std::int32_t root_id() const { return branches.front().id(); }
  const Branch* find(std::int32_t id) const;
  std::optional<std::int32_t> parent_of(std::int32_t id) const;
  int depth_of(std::int32_t id) const;
  std::size_t clamped_radius_count() const;
};

/// Branch from `start` to `end` whose interior control points are pushed off
/// the chord by Gaussian offsets, with the offset scale bisected until the
/// arc/chord ratio is within 0.2% of `target_tortuosity` (or the bisection
/// budget runs out).
Spline3D make_tortuous_branch(const Vec3& start, const Vec3& end, double target_tortuosity,
                              double base_radius, const DistSpec& radius_fluctuation, Rng& rng,
                              std::int32_t branch_id, bool* radius_clamped = nullptr);

/// One arborescence. Branch ids are first_id, first_id + 1, ...
VesselTree synthesize_tree(const LabelSynthParams& params, Rng& rng, std::int32_t first_id = 1);

/// Number of trees for a density draw: round(density * volume in mm^3).
std::size_t tree_count_for_density(const LabelSynthParams& params, double density);

/// All trees of one patch, with ids unique across trees. No rasterization.
std::vector<VesselTree> sample_forest(const LabelSynthParams& params, Rng& rng);

struct RasterOptions {
  std::size_t threads = 1;
};

/// Paints branch tubes into a label volume. Holds a per-voxel stamp buffer so
/// that candidate voxels are evaluated once per branch.
class Rasterizer {
 public:
  explicit Rasterizer(LabelVolume& volume, RasterOptions options = {});

  /// Labels every voxel whose center is within radius(t*) of the centerline,
  /// t* being the nearest-point parameter. Overwrites earlier labels.
  void add_branch(const Spline3D& branch);
  void add_tree(const VesselTree& tree);

 private:
  LabelVolume& volume_;
  RasterOptions options_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t serial_ = 0;
  std::vector<std::size_t> candidates_;
};

void rasterize(const VesselTree& tree, LabelVolume& volume, const RasterOptions& options = {});

struct LabelSynthesis {
  LabelVolume volume;
  std::vector<VesselTree> trees;

  std::size_t branch_count() const;
};

LabelSynthesis synthesize_label_volume(const LabelSynthParams& params, Rng& rng,
                                       const RasterOptions& options = {});

struct BranchDropResult {
  LabelVolume volume;
  std::vector<std::int32_t> dropped;
};

/// Removes each non-root branch independently with probability drop_prob by
/// zeroing the voxels that carry its id.
BranchDropResult drop_branches(const LabelVolume& volume, std::span<const VesselTree> trees,
                               double drop_prob, Rng& rng);

/// Binary foreground (label > 0) as 0/1 labels.
LabelVolume foreground(const LabelVolume& labels);

}  // namespace vsynth
