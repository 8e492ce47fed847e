#pragma once

#include <string>

#include "vsynth/io/config.hpp"

namespace vsynth::test {

// 32^3 patches that still hold 2-3 small trees; fast enough for unit tests.
inline const char* kSmallConfigJson = R"({
  "labels": {
    "volume_shape": [32, 32, 32],
    "tree_density": {"family": "uniform", "a": 8.0, "b": 12.0},
    "root_radius": {"family": "lognormal", "a": -3.0, "b": 0.017},
    "max_tree_depth": {"family": "uniform_int", "a": 1, "b": 3},
    "children_per_spline": {"family": "uniform_int", "a": 1, "b": 3}
  }
})";

inline io::SynthConfig small_config(std::uint64_t seed = 7, std::size_t n = 3) {
  io::SynthConfig c = io::parse_config_text(kSmallConfigJson);
  c.generation.seed = seed;
  c.generation.n = n;
  return c;
}

}  // namespace vsynth::test
