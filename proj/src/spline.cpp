#include "vsynth/spline.hpp"

#include <algorithm>

namespace vsynth {

std::vector<double> cubic_upsampling_weights(std::size_t n_knots, std::size_t n_out) {
  std::vector<double> w(n_out * n_knots, 0.0);
  if (n_knots == 1) {
    std::fill(w.begin(), w.end(), 1.0);
    return w;
  }
  std::vector<double> unit(n_knots, 0.0);
  for (std::size_t j = 0; j < n_knots; ++j) {
    std::fill(unit.begin(), unit.end(), 0.0);
    unit[j] = 1.0;
    const NaturalCubicSpline<double> basis(unit);
    for (std::size_t i = 0; i < n_out; ++i) {
      const double t = n_out > 1 ? static_cast<double>(i) / static_cast<double>(n_out - 1) : 0.0;
      w[i * n_knots + j] = basis.value(t);
    }
  }
  return w;
}

}  // namespace vsynth
