#include "vsynth/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "vsynth/errors.hpp"

namespace vsynth {

namespace {

constexpr std::array<double, 5> kGaussNodes{0.0, -0.5384693101056831, 0.5384693101056831,
                                            -0.9061798459386640, 0.9061798459386640};
constexpr std::array<double, 5> kGaussWeights{0.5688888888888889, 0.4786286704993665,
                                              0.4786286704993665, 0.2369268850561891,
                                              0.2369268850561891};

double speed_integral(const NaturalCubicSpline<Vec3>& s, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double acc = 0;
  for (std::size_t i = 0; i < kGaussNodes.size(); ++i) {
    acc += kGaussWeights[i] * s.derivative(mid + half * kGaussNodes[i]).norm();
  }
  return acc * half;
}

double adaptive_length(const NaturalCubicSpline<Vec3>& s, double a, double b, double whole, double rel_tol,
                       int depth) {
  const double m = 0.5 * (a + b);
  const double left = speed_integral(s, a, m);
  const double right = speed_integral(s, m, b);
  const double refined = left + right;
  if (depth <= 0 || std::abs(refined - whole) <= rel_tol * std::abs(refined)) return refined;
  return adaptive_length(s, a, m, left, rel_tol, depth - 1) +
         adaptive_length(s, m, b, right, rel_tol, depth - 1);
}

double squared_distance(const Spline3D& s, double t, const Vec3& q) {
  return (s.point(t) - q).squaredNorm();
}

struct Candidate {
  double t;
  double f;
};

// Parabola through three equally spaced samples; returns the vertex clamped to
// the bracket, or the middle abscissa if the parabola is not convex.
double parabolic_vertex(double t0, double t1, double t2, double f0, double f1, double f2) {
  const double curvature = f0 - 2.0 * f1 + f2;
  if (!(curvature > 0)) return t1;
  const double step = 0.5 * (t1 - t0) * (f0 - f2) / curvature;
  return std::clamp(t1 + step, t0, t2);
}

Candidate gauss_newton(const Spline3D& s, const Vec3& q, Candidate start,
                       const NearestPointOptions& opt) {
  Candidate best = start;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    const Vec3 r = s.point(best.t) - q;
    const Vec3 d = s.tangent(best.t);
    const double jtj = d.squaredNorm();
    if (jtj <= std::numeric_limits<double>::min()) break;
    // Newton when the full Hessian is positive, Gauss-Newton otherwise.
    const double hess = jtj + r.dot(s.path().second_derivative(best.t));
    double dt = -d.dot(r) / (hess > 0.25 * jtj ? hess : jtj);
    bool improved = false;
    for (int halving = 0; halving < 12; ++halving) {
      const double t = std::clamp(best.t + dt, 0.0, 1.0);
      const double f = squared_distance(s, t, q);
      if (f <= best.f) {
        dt = t - best.t;
        best = {t, f};
        improved = true;
        break;
      }
      dt *= 0.5;
    }
    if (!improved || std::abs(dt) < opt.tolerance) break;
  }
  return best;
}

}  // namespace

Spline3D::Spline3D(std::vector<Vec3> control_points, std::vector<double> radius_knots,
                   std::int32_t branch_id)
    : branch_id_(branch_id) {
  if (control_points.size() < 2) throw DomainError("Spline3D needs at least 2 control points");
  if (radius_knots.empty()) throw DomainError("Spline3D needs a radius profile");
  if (radius_knots.size() == 1) radius_knots.push_back(radius_knots.front());
  for (double r : radius_knots) {
    if (!(r > 0) || !std::isfinite(r)) throw DomainError("Spline3D radius must be positive");
  }
  for (const Vec3& p : control_points) {
    if (!p.allFinite()) throw DomainError("Spline3D control points must be finite");
  }
  if (branch_id <= 0) throw DomainError("branch id must be positive");

  const std::size_t n_ctrl = control_points.size();
  path_ = NaturalCubicSpline<Vec3>(std::move(control_points));
  min_radius_knot_ = *std::min_element(radius_knots.begin(), radius_knots.end());
  radius_ = NaturalCubicSpline<double>(std::move(radius_knots));

  const std::size_t n_coarse = std::max<std::size_t>(16, 4 * n_ctrl);
  coarse_points_.reserve(n_coarse);
  for (std::size_t i = 0; i < n_coarse; ++i) {
    coarse_points_.push_back(path_.value(static_cast<double>(i) / static_cast<double>(n_coarse - 1)));
  }

  // Exact maximum: the radius derivative is quadratic on each knot interval.
  const double h = radius_.knot_spacing();
  const auto ry = radius_.knots();
  const auto rm = radius_.knot_second_derivatives();
  max_radius_ = *std::max_element(ry.begin(), ry.end());
  for (std::size_t k = 0; k + 1 < ry.size(); ++k) {
    const double qa = 0.5 * h * (rm[k + 1] - rm[k]);
    const double qb = h * rm[k];
    const double qc = (ry[k + 1] - ry[k]) / h - h / 6.0 * (2.0 * rm[k] + rm[k + 1]);
    auto consider = [&](double s) {
      if (s > 0.0 && s < 1.0) max_radius_ = std::max(max_radius_, radius((static_cast<double>(k) + s) * h));
    };
    if (std::abs(qa) < 1e-300) {
      if (qb != 0.0) consider(-qc / qb);
    } else {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        consider((-qb + sq) / (2.0 * qa));
        consider((-qb - sq) / (2.0 * qa));
      }
    }
  }

  // The second derivative is piecewise linear, so its norm peaks at a knot.
  for (const Vec3& m : path_.knot_second_derivatives()) curvature_bound_ = std::max(curvature_bound_, m.norm());
}

Spline3D Spline3D::with_constant_radius(std::vector<Vec3> control_points, double radius,
                                        std::int32_t branch_id) {
  return Spline3D(std::move(control_points), {radius, radius}, branch_id);
}

Vec3 Spline3D::eval(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("spline parameter " + std::to_string(t) + " outside [0, 1]");
  }
  return path_.value(t);
}

double Spline3D::radius(double t) const { return std::max(radius_.value(t), min_radius_knot_); }

NearestPointResult nearest_point(const Spline3D& spline, const Vec3& query,
                                 const NearestPointOptions& options) {
  const auto coarse = spline.coarse_points();
  const std::size_t n = coarse.size();
  const double dt = 1.0 / static_cast<double>(n - 1);

  std::array<double, 64> small_buffer{};
  std::vector<double> heap_buffer;
  double* f = small_buffer.data();
  if (n > small_buffer.size()) {
    heap_buffer.resize(n);
    f = heap_buffer.data();
  }
  for (std::size_t i = 0; i < n; ++i) f[i] = (coarse[i] - query).squaredNorm();

  // Discrete local minima, best first.
  std::array<std::size_t, 8> starts{};
  std::size_t n_starts = 0;
  const auto max_starts =
      static_cast<std::size_t>(std::clamp(options.max_starts, 1, static_cast<int>(starts.size())));
  for (std::size_t i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || f[i] <= f[i - 1];
    const bool right_ok = i + 1 == n || f[i] < f[i + 1];
    if (!(left_ok && right_ok)) continue;
    // insertion into the bounded best-first list
    std::size_t pos = n_starts;
    while (pos > 0 && f[starts[pos - 1]] > f[i]) --pos;
    if (pos >= max_starts) continue;
    if (n_starts < max_starts) ++n_starts;
    for (std::size_t j = n_starts - 1; j > pos; --j) starts[j] = starts[j - 1];
    starts[pos] = i;
  }

  Candidate best{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t s = 0; s < n_starts; ++s) {
    const std::size_t i = starts[s];
    Candidate c{static_cast<double>(i) * dt, f[i]};
    const std::size_t mid = std::clamp<std::size_t>(i, 1, n - 2);
    const double tv =
        parabolic_vertex(static_cast<double>(mid - 1) * dt, static_cast<double>(mid) * dt,
                         static_cast<double>(mid + 1) * dt, f[mid - 1], f[mid], f[mid + 1]);
    const double fv = squared_distance(spline, tv, query);
    if (fv < c.f) c = {tv, fv};
    c = gauss_newton(spline, query, c, options);
    if (c.f < best.f) best = c;
  }
  return {best.t, std::sqrt(best.f)};
}

double arc_length(const NaturalCubicSpline<Vec3>& spline, double relative_tolerance) {
  const std::size_t segments = spline.size() - 1;
  const double h = 1.0 / static_cast<double>(segments);
  double total = 0;
  for (std::size_t k = 0; k < segments; ++k) {
    const double a = static_cast<double>(k) * h;
    const double b = (k + 1 == segments) ? 1.0 : a + h;
    total += adaptive_length(spline, a, b, speed_integral(spline, a, b), relative_tolerance, 30);
  }
  return total;
}

double tortuosity(const Spline3D& spline) { return tortuosity(spline.path()); }

double tortuosity(const NaturalCubicSpline<Vec3>& spline) {
  const auto cps = spline.knots();
  const double chord = (cps.back() - cps.front()).norm();
  if (!(chord > 1e-9)) throw DegenerateChordError("tortuosity undefined: endpoints coincide");
  return arc_length(spline) / chord;
}

Aabb centerline_bounds(const Spline3D& spline) {
  // Exact: per segment and axis the derivative is a quadratic in s.
  const NaturalCubicSpline<Vec3>& path = spline.path();
  const auto y = path.knots();
  const auto m = path.knot_second_derivatives();
  const double h = path.knot_spacing();
  Aabb box{y[0], y[0]};
  auto extend = [&](const Vec3& p) {
    box.lo = box.lo.cwiseMin(p);
    box.hi = box.hi.cwiseMax(p);
  };
  for (const Vec3& p : y) extend(p);
  for (std::size_t k = 0; k + 1 < y.size(); ++k) {
    for (int d = 0; d < 3; ++d) {
      const double qa = 0.5 * h * (m[k + 1][d] - m[k][d]);
      const double qb = h * m[k][d];
      const double qc = (y[k + 1][d] - y[k][d]) / h - h / 6.0 * (2.0 * m[k][d] + m[k + 1][d]);
      auto consider = [&](double s) {
        if (s > 0.0 && s < 1.0) extend(path.value((static_cast<double>(k) + s) * h));
      };
      if (std::abs(qa) < 1e-300) {
        if (qb != 0.0) consider(-qc / qb);
      } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          consider((-qb + sq) / (2.0 * qa));
          consider((-qb - sq) / (2.0 * qa));
        }
      }
    }
  }
  return box;
}

}  // namespace vsynth
