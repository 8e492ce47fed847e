#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "vsynth/errors.hpp"

namespace vsynth {

namespace detail {

template <class T>
T zero_like(const T& v) {
  return v * 0.0;
}

}  // namespace detail

/// Natural cubic interpolating spline over uniformly spaced knots on [0, 1].
///
/// Knot i sits at t = i / (n - 1). T is any vector-space value type with
/// T + T and T * double (double, Eigen::Vector3d).
template <class T>
class NaturalCubicSpline {
 public:
  NaturalCubicSpline() = default;

  explicit NaturalCubicSpline(std::vector<T> knots) : y_(std::move(knots)) {
    if (y_.size() < 2) throw DomainError("cubic spline needs at least 2 knots");
    h_ = 1.0 / static_cast<double>(y_.size() - 1);
    solve_second_derivatives();
  }

  std::size_t size() const { return y_.size(); }
  std::span<const T> knots() const { return y_; }
  double knot_spacing() const { return h_; }
  /// Second derivatives at the knots (zero at both ends).
  std::span<const T> knot_second_derivatives() const { return m_; }

  /// Value at t; t is clamped to [0, 1].
  T value(double t) const {
    const auto [k, s] = locate(t);
    const double r = 1.0 - s;
    const double c = h_ * h_ / 6.0;
    return y_[k] * r + y_[k + 1] * s + (m_[k] * (r * r * r - r) + m_[k + 1] * (s * s * s - s)) * c;
  }

  T derivative(double t) const {
    const auto [k, s] = locate(t);
    const double r = 1.0 - s;
    return (y_[k + 1] - y_[k]) * (1.0 / h_) +
           (m_[k] * (1.0 - 3.0 * r * r) + m_[k + 1] * (3.0 * s * s - 1.0)) * (h_ / 6.0);
  }

  T second_derivative(double t) const {
    const auto [k, s] = locate(t);
    return m_[k] * (1.0 - s) + m_[k + 1] * s;
  }

 private:
  std::pair<std::size_t, double> locate(double t) const {
    const std::size_t segments = y_.size() - 1;
    const double u = std::clamp(t, 0.0, 1.0) * static_cast<double>(segments);
    std::size_t k = static_cast<std::size_t>(u);
    if (k >= segments) k = segments - 1;
    return {k, u - static_cast<double>(k)};
  }

  // Tridiagonal system M[i-1] + 4 M[i] + M[i+1] = 6/h^2 (y[i+1] - 2 y[i] + y[i-1]),
  // with M[0] = M[n-1] = 0, solved by the Thomas algorithm.
  void solve_second_derivatives() {
    const std::size_t n = y_.size();
    m_.assign(n, detail::zero_like(y_[0]));
    if (n < 3) return;
    const std::size_t inner = n - 2;
    std::vector<double> c_prime(inner);
    std::vector<T> d_prime(inner, detail::zero_like(y_[0]));
    const double scale = 6.0 / (h_ * h_);
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t i = j + 1;
      const T rhs = (y_[i + 1] - y_[i] * 2.0 + y_[i - 1]) * scale;
      const double denom = 4.0 - (j > 0 ? c_prime[j - 1] : 0.0);
      c_prime[j] = 1.0 / denom;
      d_prime[j] = (j > 0 ? (rhs - d_prime[j - 1]) : rhs) * (1.0 / denom);
    }
    for (std::size_t j = inner - 1; j-- > 0;) {
      d_prime[j] = d_prime[j] - d_prime[j + 1] * c_prime[j];
    }
    for (std::size_t j = 0; j < inner; ++j) m_[j + 1] = d_prime[j];
  }

  std::vector<T> y_;
  std::vector<T> m_;
  double h_ = 1.0;
};

/// Row-major (n_out x n_knots) matrix W with value(x_i) = sum_j W[i][j] knot_j for a
/// natural cubic spline sampled at n_out uniformly spaced points of [0, 1].
/// Interpolation is linear in the knot values, so W is built from unit knots.
std::vector<double> cubic_upsampling_weights(std::size_t n_knots, std::size_t n_out);

}  // namespace vsynth
