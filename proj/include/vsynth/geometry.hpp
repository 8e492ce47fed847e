#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "vsynth/spline.hpp"

namespace vsynth {

using Vec3 = Eigen::Vector3d;

/// Tube centerline with a companion radius profile, both natural cubic splines
/// over t in [0, 1]. Coordinates and radii are in voxel units.
class Spline3D {
 public:
  Spline3D(std::vector<Vec3> control_points, std::vector<double> radius_knots,
           std::int32_t branch_id = 1);

  static Spline3D with_constant_radius(std::vector<Vec3> control_points, double radius,
                                       std::int32_t branch_id = 1);

  /// Point at t; throws DomainError for t outside [0, 1].
  Vec3 eval(double t) const;

  // Unchecked accessors (t clamped to [0, 1]) for inner loops.
  Vec3 point(double t) const { return path_.value(t); }
  Vec3 tangent(double t) const { return path_.derivative(t); }
  Vec3 curvature_vector(double t) const { return path_.second_derivative(t); }

  /// Radius at t. Floored at the smallest radius knot so cubic undershoot can
  /// never produce a non-positive radius.
  double radius(double t) const;
  double max_radius() const { return max_radius_; }
  double min_radius() const { return min_radius_knot_; }
  /// Upper bound on |d^2 point / dt^2| over [0, 1].
  double curvature_bound() const { return curvature_bound_; }

  const NaturalCubicSpline<Vec3>& path() const { return path_; }
  std::span<const Vec3> control_points() const { return path_.knots(); }
  std::span<const double> radius_knots() const { return radius_.knots(); }
  std::int32_t branch_id() const { return branch_id_; }

  /// Uniform samples used by the discrete stage of nearest_point.
  std::size_t coarse_count() const { return coarse_points_.size(); }
  std::span<const Vec3> coarse_points() const { return coarse_points_; }

 private:
  NaturalCubicSpline<Vec3> path_;
  NaturalCubicSpline<double> radius_;
  std::int32_t branch_id_ = 1;
  double min_radius_knot_ = 0;
  double max_radius_ = 0;
  double curvature_bound_ = 0;
  std::vector<Vec3> coarse_points_;
};

struct NearestPointResult {
  double t_star = 0;
  double distance = 0;
};

struct NearestPointOptions {
  double tolerance = 1e-4;  // stop when |dt| falls below this
  int max_iterations = 16;  // Gauss-Newton iterations per start
  int max_starts = 3;       // discrete local minima refined
};

/// Closest point on the centerline: discrete scan over the coarse samples,
/// parabolic vertex step through the best sample and its neighbours, then
/// Gauss-Newton on |C(t) - q|^2 with step halving. The result is never worse
/// than the best coarse sample.
NearestPointResult nearest_point(const Spline3D& spline, const Vec3& query,
                                 const NearestPointOptions& options = {});

/// Arc length by adaptive 5-point Gauss-Legendre quadrature per knot interval.
double arc_length(const NaturalCubicSpline<Vec3>& path, double relative_tolerance = 1e-5);
inline double arc_length(const Spline3D& spline, double relative_tolerance = 1e-5) {
  return arc_length(spline.path(), relative_tolerance);
}

/// Arc/chord ratio of a bare centerline.
double tortuosity(const NaturalCubicSpline<Vec3>& path);

/// Arc length over endpoint chord; throws DegenerateChordError if the chord vanishes.
double tortuosity(const Spline3D& spline);

struct Aabb {
  Vec3 lo;
  Vec3 hi;
};

/// Bounding box of the centerline (dense sampling), not dilated by the radius.
Aabb centerline_bounds(const Spline3D& spline);

}  // namespace vsynth
