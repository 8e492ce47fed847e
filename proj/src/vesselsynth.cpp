#include "vsynth/vesselsynth.hpp"

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "vsynth/errors.hpp"
#include "vsynth/parallel.hpp"

namespace vsynth {

namespace {

constexpr int kMaxBisectionSteps = 20;
constexpr int kMaxScaleDoublings = 60;
constexpr double kTortuosityTolerance = 2e-3;

Vec3 uniform_point(Rng& rng, const Vec3& lo, const Vec3& hi) {
  Vec3 p;
  for (int d = 0; d < 3; ++d) p[d] = lo[d] + (hi[d] - lo[d]) * rng.uniform01();
  return p;
}

Vec3 random_direction(Rng& rng) {
  for (;;) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-8) return v / n;
  }
}

// Any orthonormal pair spanning the plane perpendicular to `axis` (unit).
std::pair<Vec3, Vec3> perpendicular_basis(const Vec3& axis) {
  const Vec3 helper = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = axis.cross(helper).normalized();
  return {u, axis.cross(u)};
}

double clamp_radius(double r, bool& clamped) {
  if (r < kMinRadiusVoxels || !std::isfinite(r)) {
    clamped = true;
    return kMinRadiusVoxels;
  }
  return r;
}

double point_segment_distance2(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (a + s * ab - p).squaredNorm();
}

}  // namespace

void LabelSynthParams::validate() const {
  for (const DistSpec* d : {&tree_density, &children_per_spline, &max_tree_depth, &tortuosity,
                            &root_radius, &child_radius_factor, &radius_fluctuation,
                            &child_length_factor}) {
    d->validate();
  }
  for (std::size_t e : volume_shape) {
    if (e == 0) throw DomainError("volume_shape entries must be positive");
  }
  if (!(voxel_size_um > 0)) throw DomainError("voxel_size_um must be positive");
  if (!(root_radius_unit_mm > 0)) throw DomainError("root_radius_unit_mm must be positive");
}

double volume_mm3(const LabelSynthParams& params) {
  const double mm = params.voxel_size_um / 1000.0;
  return static_cast<double>(voxel_count(params.volume_shape)) * mm * mm * mm;
}

const Branch* VesselTree::find(std::int32_t id) const {
  for (const Branch& b : branches) {
    if (b.id() == id) return &b;
  }
  return nullptr;
}

std::optional<std::int32_t> VesselTree::parent_of(std::int32_t id) const {
  const Branch* b = find(id);
  if (b == nullptr || b->parent == 0) return std::nullopt;
  return b->parent;
}

int VesselTree::depth_of(std::int32_t id) const {
  const Branch* b = find(id);
  return b == nullptr ? -1 : b->depth;
}

std::size_t VesselTree::clamped_radius_count() const {
  return static_cast<std::size_t>(
      std::count_if(branches.begin(), branches.end(), [](const Branch& b) { return b.radius_clamped; }));
}

Spline3D make_tortuous_branch(const Vec3& start, const Vec3& end, double target_tortuosity,
                              double base_radius, const DistSpec& radius_fluctuation, Rng& rng,
                              std::int32_t branch_id, bool* radius_clamped) {
  const Vec3 chord = end - start;
  const double length = chord.norm();
  if (!(length > 0)) throw DegenerateChordError("branch endpoints coincide");
  const auto n_ctrl = static_cast<std::size_t>(
      std::max<long>(4, std::lround(length / kChordPerControlPoint)));
  const auto [u, v] = perpendicular_basis(chord / length);

  std::vector<Vec3> base(n_ctrl);
  std::vector<Vec3> offsets(n_ctrl, Vec3::Zero());
  for (std::size_t i = 0; i < n_ctrl; ++i) {
    base[i] = start + chord * (static_cast<double>(i) / static_cast<double>(n_ctrl - 1));
    if (i > 0 && i + 1 < n_ctrl) offsets[i] = (rng.normal() * u + rng.normal() * v) * length;
  }
  base.back() = end;

  auto points_at = [&](double scale) {
    std::vector<Vec3> pts(n_ctrl);
    for (std::size_t i = 0; i < n_ctrl; ++i) pts[i] = base[i] + scale * offsets[i];
    return pts;
  };
  auto tortuosity_at = [&](double scale) {
    return tortuosity(NaturalCubicSpline<Vec3>(points_at(scale)));
  };

  double scale = 0;
  const double target = std::max(1.0, target_tortuosity);
  if (target > 1.0 + 1e-9) {
    double lo = 0;
    double hi = 0.25;
    for (int i = 0; i < kMaxScaleDoublings && tortuosity_at(hi) < target; ++i) {
      lo = hi;
      hi *= 2;
    }
    double best_err = std::numeric_limits<double>::infinity();
    for (int step = 0; step < kMaxBisectionSteps; ++step) {
      const double mid = 0.5 * (lo + hi);
      const double tau = tortuosity_at(mid);
      const double err = std::abs(tau / target - 1.0);
      if (err < best_err) {
        best_err = err;
        scale = mid;
      }
      if (err <= kTortuosityTolerance) break;
      (tau < target ? lo : hi) = mid;
    }
  }

  bool clamped = false;
  std::vector<double> radii(n_ctrl);
  for (double& r : radii) r = clamp_radius(base_radius * sample(radius_fluctuation, rng), clamped);
  if (radius_clamped != nullptr) *radius_clamped = *radius_clamped || clamped;
  return Spline3D(points_at(scale), std::move(radii), branch_id);
}

VesselTree synthesize_tree(const LabelSynthParams& params, Rng& rng, std::int32_t first_id) {
  params.validate();
  VesselTree tree;
  tree.depth_bound = static_cast<int>(std::max<std::int64_t>(1, sample_integer(params.max_tree_depth, rng)));

  Vec3 lo;
  Vec3 hi;
  for (int d = 0; d < 3; ++d) {
    const auto n = static_cast<double>(params.volume_shape[static_cast<std::size_t>(d)]);
    lo[d] = -kRootPadding * n;
    hi[d] = (1.0 + kRootPadding) * n - 1.0;
  }

  std::int32_t next_id = first_id;
  auto add_branch = [&](const Vec3& start, const Vec3& end, double radius, std::int32_t parent,
                        int depth) {
    Branch b{Spline3D::with_constant_radius({start, end}, 1.0, next_id)};
    b.parent = parent;
    b.depth = depth;
    b.radius_clamped = false;
    b.base_radius = clamp_radius(radius, b.radius_clamped);
    b.target_tortuosity = sample(params.tortuosity, rng);
    b.curve = make_tortuous_branch(start, end, b.target_tortuosity, b.base_radius,
                                   params.radius_fluctuation, rng, next_id, &b.radius_clamped);
    if (b.radius_clamped) {
      spdlog::debug("branch {}: radius clamped to {} voxel", next_id, kMinRadiusVoxels);
    }
    ++next_id;
    tree.branches.push_back(std::move(b));
  };

  Vec3 p0 = uniform_point(rng, lo, hi);
  Vec3 p1 = uniform_point(rng, lo, hi);
  for (int tries = 0; (p1 - p0).norm() < 1.0 && tries < 64; ++tries) p1 = uniform_point(rng, lo, hi);
  if ((p1 - p0).norm() < 1.0) p1 = p0 + Vec3::UnitX();
  const double root_radius = sample(params.root_radius, rng) * params.root_radius_unit_mm * 1000.0 /
                             params.voxel_size_um;
  add_branch(p0, p1, root_radius, 0, 0);

  std::vector<std::size_t> frontier{0};
  for (int depth = 1; depth < tree.depth_bound; ++depth) {
    std::vector<std::size_t> next;
    for (std::size_t parent_index : frontier) {
      const auto n_children = std::max<std::int64_t>(0, sample_integer(params.children_per_spline, rng));
      for (std::int64_t c = 0; c < n_children; ++c) {
        const Branch& parent = tree.branches[parent_index];
        const auto cps = parent.curve.control_points();
        const double parent_chord = (cps.back() - cps.front()).norm();
        const Vec3 start = parent.curve.point(rng.uniform01());
        const double radius = parent.base_radius * sample(params.child_radius_factor, rng);
        const double length = std::max(1.0, parent_chord * sample(params.child_length_factor, rng));
        const Vec3 end = start + random_direction(rng) * length;
        const std::int32_t parent_id = parent.id();
        add_branch(start, end, radius, parent_id, depth);
        next.push_back(tree.branches.size() - 1);
      }
    }
    frontier = std::move(next);
  }
  return tree;
}

std::size_t tree_count_for_density(const LabelSynthParams& params, double density) {
  const double expected = density * volume_mm3(params);
  return expected > 0 ? static_cast<std::size_t>(std::llround(expected)) : 0;
}

std::vector<VesselTree> sample_forest(const LabelSynthParams& params, Rng& rng) {
  params.validate();
  const std::size_t count = tree_count_for_density(params, sample(params.tree_density, rng));
  std::vector<VesselTree> trees;
  trees.reserve(count);
  std::int32_t next_id = 1;
  for (std::size_t i = 0; i < count; ++i) {
    trees.push_back(synthesize_tree(params, rng, next_id));
    next_id += static_cast<std::int32_t>(trees.back().size());
  }
  return trees;
}

Rasterizer::Rasterizer(LabelVolume& volume, RasterOptions options)
    : volume_(volume), options_(options), stamp_(volume.size(), 0) {}

void Rasterizer::add_branch(const Spline3D& branch) {
  const Shape3& shape = volume_.shape;
  const double r_max = branch.max_radius();
  const Aabb box = centerline_bounds(branch);
  for (int d = 0; d < 3; ++d) {
    const auto extent = static_cast<double>(shape[static_cast<std::size_t>(d)]);
    if (box.hi[d] + r_max + 1.0 < -0.5 || box.lo[d] - r_max - 1.0 > extent - 0.5) return;
  }

  // Chords of a polyline sampled at step dt in t stay within
  // curvature_bound * dt^2 / 8 of the curve, so the polyline distance
  // brackets the true centerline distance. Voxels that are certainly inside
  // the thinnest part of the tube are labeled directly; only the shell in
  // between goes through nearest_point.
  const double length = arc_length(branch, 1e-4);
  const double piece = std::clamp(0.25 * r_max, 0.25, 4.0);
  const double curvature = branch.curvature_bound();
  const auto n_pieces = std::max<std::size_t>(
      {1, static_cast<std::size_t>(std::ceil(length / piece)),
       static_cast<std::size_t>(std::ceil(std::sqrt(curvature / (8.0 * 0.1))))});
  const double dt = 1.0 / static_cast<double>(n_pieces);
  const double slack = curvature * dt * dt / 8.0 + 1e-9;
  std::vector<Vec3> poly(n_pieces + 1);
  for (std::size_t i = 0; i <= n_pieces; ++i) poly[i] = branch.point(static_cast<double>(i) * dt);
  const double reach = r_max + slack;
  const double reach2 = reach * reach;
  const double inner = branch.min_radius() - slack;
  const double inner2 = inner > 0 ? inner * inner : -1.0;

  // stamp_ holds 2 * serial for pending candidates and 2 * serial + 1 for
  // voxels already labeled in this call.
  if (serial_ >= std::numeric_limits<std::uint32_t>::max() / 2 - 1) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    serial_ = 0;
  }
  ++serial_;
  const std::uint32_t pending = 2 * serial_;
  const std::uint32_t done = pending + 1;
  const std::int32_t id = branch.branch_id();
  candidates_.clear();
  for (std::size_t i = 0; i < n_pieces; ++i) {
    const Vec3 a = poly[i];
    const Vec3 b = poly[i + 1];
    std::array<long, 3> lo{};
    std::array<long, 3> hi{};
    bool empty = false;
    for (int d = 0; d < 3; ++d) {
      const auto n = static_cast<long>(shape[static_cast<std::size_t>(d)]);
      lo[d] = std::max(0L, static_cast<long>(std::ceil(std::min(a[d], b[d]) - reach)));
      hi[d] = std::min(n - 1, static_cast<long>(std::floor(std::max(a[d], b[d]) + reach)));
      empty = empty || lo[d] > hi[d];
    }
    if (empty) continue;
    for (long z = lo[2]; z <= hi[2]; ++z) {
      for (long y = lo[1]; y <= hi[1]; ++y) {
        for (long x = lo[0]; x <= hi[0]; ++x) {
          const std::size_t idx = volume_.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                                static_cast<std::size_t>(z));
          const std::uint32_t st = stamp_[idx];
          if (st == done) continue;
          const Vec3 p(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
          const double d2 = point_segment_distance2(p, a, b);
          if (d2 <= inner2) {
            stamp_[idx] = done;
            volume_.voxels[idx] = id;
            continue;
          }
          if (st == pending || d2 > reach2) continue;
          stamp_[idx] = pending;
          candidates_.push_back(idx);
        }
      }
    }
  }

  const std::size_t nx = shape[0];
  const std::size_t nxy = shape[0] * shape[1];
  const std::size_t chunk = 4096;
  const std::size_t n_chunks = (candidates_.size() + chunk - 1) / chunk;
  parallel_for(n_chunks, options_.threads, [&](std::size_t c) {
    const std::size_t end = std::min(candidates_.size(), (c + 1) * chunk);
    for (std::size_t k = c * chunk; k < end; ++k) {
      const std::size_t idx = candidates_[k];
      if (stamp_[idx] == done) continue;
      const Vec3 p(static_cast<double>(idx % nx), static_cast<double>((idx / nx) % shape[1]),
                   static_cast<double>(idx / nxy));
      const NearestPointResult np = nearest_point(branch, p);
      if (np.distance <= branch.radius(np.t_star)) volume_.voxels[idx] = id;
    }
  });
}

void Rasterizer::add_tree(const VesselTree& tree) {
  for (const Branch& b : tree.branches) add_branch(b.curve);
}

void rasterize(const VesselTree& tree, LabelVolume& volume, const RasterOptions& options) {
  Rasterizer r(volume, options);
  r.add_tree(tree);
}

std::size_t LabelSynthesis::branch_count() const {
  std::size_t n = 0;
  for (const VesselTree& t : trees) n += t.size();
  return n;
}

LabelSynthesis synthesize_label_volume(const LabelSynthParams& params, Rng& rng,
                                       const RasterOptions& options) {
  LabelSynthesis out;
  out.trees = sample_forest(params, rng);
  out.volume = LabelVolume(params.volume_shape, params.voxel_size_um, 0);
  Rasterizer raster(out.volume, options);
  for (const VesselTree& t : out.trees) raster.add_tree(t);
  return out;
}

BranchDropResult drop_branches(const LabelVolume& volume, std::span<const VesselTree> trees,
                               double drop_prob, Rng& rng) {
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) throw DomainError("drop_prob must lie in [0, 1]");
  BranchDropResult out{volume, {}};
  std::int32_t max_id = 0;
  for (const VesselTree& t : trees) {
    for (const Branch& b : t.branches) {
      max_id = std::max(max_id, b.id());
      if (b.parent != 0 && rng.uniform01() < drop_prob) out.dropped.push_back(b.id());
    }
  }
  if (out.dropped.empty()) return out;
  std::vector<std::uint8_t> gone(static_cast<std::size_t>(max_id) + 1, 0);
  for (std::int32_t id : out.dropped) gone[static_cast<std::size_t>(id)] = 1;
  for (std::int32_t& v : out.volume.voxels) {
    if (v > 0 && v <= max_id && gone[static_cast<std::size_t>(v)]) v = 0;
  }
  return out;
}

LabelVolume foreground(const LabelVolume& labels) {
  LabelVolume out(labels.shape, labels.voxel_size_um, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) out.voxels[i] = labels.voxels[i] > 0 ? 1 : 0;
  return out;
}

}  // namespace vsynth
