#include "vsynth/io/config.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vsynth/errors.hpp"

namespace vsynth::io {

using nlohmann::json;

namespace {

std::string type_name(const json& j) { return j.type_name(); }

double as_double(const json& j, std::string_view key) {
  if (!j.is_number()) throw ConfigError(std::string(key) + ": expected a number, got " + type_name(j));
  return j.get<double>();
}

bool as_bool(const json& j, std::string_view key) {
  if (!j.is_boolean()) throw ConfigError(std::string(key) + ": expected true/false, got " + type_name(j));
  return j.get<bool>();
}

std::uint64_t as_u64(const json& j, std::string_view key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ConfigError(std::string(key) + ": expected a non-negative integer, got " + j.dump());
}

// Object reader that rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object, got " + type_name(j_));
  }

  template <class Fn>
  void read(const std::string& key, Fn&& fn) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it != j_.end()) fn(*it, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (seen_.count(k) == 0) throw ConfigError("unknown key '" + path_ + "." + k + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_dist(Section& s, const std::string& key, DistSpec& out) {
  s.read(key, [&](const json& v, const std::string& path) { out = dist_from_json(v, path); });
}

void read_real(Section& s, const std::string& key, double& out) {
  s.read(key, [&](const json& v, const std::string& path) { out = as_double(v, path); });
}

void read_flag(Section& s, const std::string& key, bool& out) {
  s.read(key, [&](const json& v, const std::string& path) { out = as_bool(v, path); });
}

void require_ordered(const DistSpec& d, const std::string& path) {
  if ((d.family == Family::UniformCont || d.family == Family::UniformInt) && d.a > d.b) {
    throw ConfigError(path + ": lower bound " + std::to_string(d.a) + " exceeds upper bound " + std::to_string(d.b));
  }
}

void halve_upper(DistSpec& d) {
  switch (d.family) {
    case Family::LogNormal:
      d.b *= 0.5;
      break;
    case Family::UniformCont:
      d.b = std::max(d.a, 0.5 * d.b);
      break;
    case Family::UniformInt:
      d.b = std::max(d.a, std::floor(0.5 * d.b));
      break;
    default:
      break;
  }
}

std::string normalize_preset(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s.rfind("ablate-", 0) == 0) s = s.substr(7);
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"A", "B", "C", "D", "E", "F", "G", "H", "simple", "default"};
}

void apply_preset(SynthConfig& config, std::string_view name) {
  const std::string p = normalize_preset(name);
  if (p == "simple") {
    LabelSynthParams& l = config.labels;
    for (DistSpec* d : {&l.tree_density, &l.children_per_spline, &l.max_tree_depth, &l.tortuosity, &l.root_radius,
                        &l.child_radius_factor, &l.radius_fluctuation, &l.child_length_factor}) {
      halve_upper(*d);
    }
    return;
  }
  if (p == "default") return;
  if (p.size() == 1 && p[0] >= 'a' && p[0] <= 'h') {
    // Bits (banding, texture, spheres), condition A = all on.
    static constexpr int kFlags[8] = {0b111, 0b110, 0b101, 0b011, 0b010, 0b001, 0b100, 0b000};
    const int f = kFlags[p[0] - 'a'];
    config.images.enable_banding = (f & 0b100) != 0;
    config.images.enable_vessel_texture = (f & 0b010) != 0;
    config.images.enable_spheres = (f & 0b001) != 0;
    return;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected A..H, ablate-A..ablate-H, simple)");
}

json dist_to_json(const DistSpec& d) {
  return json{{"family", std::string(family_name(d.family))}, {"a", d.a}, {"b", d.b}};
}

DistSpec dist_from_json(const json& j, std::string_view key) {
  const std::string path(key);
  Section s(j, path);
  DistSpec d;
  bool has_family = false;
  bool has_a = false;
  bool has_b = false;
  s.read("family", [&](const json& v, const std::string& p) {
    if (!v.is_string()) throw ConfigError(p + ": expected a family name");
    const auto f = family_from_name(v.get<std::string>());
    if (!f) throw ConfigError(p + ": unknown family '" + v.get<std::string>() + "'");
    d.family = *f;
    has_family = true;
  });
  s.read("a", [&](const json& v, const std::string& p) {
    d.a = as_double(v, p);
    has_a = true;
  });
  s.read("b", [&](const json& v, const std::string& p) {
    d.b = as_double(v, p);
    has_b = true;
  });
  s.finish();
  if (!has_family || !has_a || !has_b) throw ConfigError(path + ": needs family, a and b");
  return d;
}

json to_json(const SynthConfig& c) {
  const LabelSynthParams& l = c.labels;
  const ImageSynthParams& i = c.images;
  json labels{
      {"tree_density", dist_to_json(l.tree_density)},
      {"children_per_spline", dist_to_json(l.children_per_spline)},
      {"max_tree_depth", dist_to_json(l.max_tree_depth)},
      {"tortuosity", dist_to_json(l.tortuosity)},
      {"root_radius", dist_to_json(l.root_radius)},
      {"child_radius_factor", dist_to_json(l.child_radius_factor)},
      {"radius_fluctuation", dist_to_json(l.radius_fluctuation)},
      {"child_length_factor", dist_to_json(l.child_length_factor)},
      {"volume_shape", {l.volume_shape[0], l.volume_shape[1], l.volume_shape[2]}},
      {"voxel_size_um", l.voxel_size_um},
      {"root_radius_unit_mm", l.root_radius_unit_mm},
  };
  json images{
      {"n_parenchyma_maps", dist_to_json(i.n_parenchyma_maps)},
      {"spline_ctrl_per_dim", dist_to_json(i.spline_ctrl_per_dim)},
      {"parenchyma_intensity_var", i.parenchyma_intensity_var},
      {"vessel_texture_mean", dist_to_json(i.vessel_texture_mean)},
      {"vessel_texture_var", i.vessel_texture_var},
      {"speckle_sd", dist_to_json(i.speckle_sd)},
      {"band_width", dist_to_json(i.band_width)},
      {"band_factor", dist_to_json(i.band_factor)},
      {"sphere_radius", dist_to_json(i.sphere_radius)},
      {"sphere_freq", dist_to_json(i.sphere_freq)},
      {"sphere_intensity", dist_to_json(i.sphere_intensity)},
      {"enable_banding", i.enable_banding},
      {"enable_vessel_texture", i.enable_vessel_texture},
      {"enable_spheres", i.enable_spheres},
  };
  json generation{
      {"seed", c.generation.seed},
      {"n", c.generation.n},
      {"workers", c.generation.workers},
      {"compress", c.generation.compress},
  };
  return json{{"labels", labels}, {"images", images}, {"generation", generation}};
}

SynthConfig config_from_json(const json& doc, const std::optional<std::string>& preset_override) {
  SynthConfig c;
  Section root(doc, "config");

  std::optional<std::string> preset = preset_override;
  root.read("preset", [&](const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path + ": expected a preset name");
    if (!preset) preset = v.get<std::string>();
  });
  if (preset) apply_preset(c, *preset);

  root.read("labels", [&](const json& v, const std::string& path) {
    Section s(v, path);
    LabelSynthParams& l = c.labels;
    read_dist(s, "tree_density", l.tree_density);
    read_dist(s, "children_per_spline", l.children_per_spline);
    read_dist(s, "max_tree_depth", l.max_tree_depth);
    read_dist(s, "tortuosity", l.tortuosity);
    read_dist(s, "root_radius", l.root_radius);
    read_dist(s, "child_radius_factor", l.child_radius_factor);
    read_dist(s, "radius_fluctuation", l.radius_fluctuation);
    read_dist(s, "child_length_factor", l.child_length_factor);
    s.read("volume_shape", [&](const json& arr, const std::string& p) {
      if (!arr.is_array() || arr.size() != 3) throw ConfigError(p + ": expected [x, y, z]");
      for (std::size_t d = 0; d < 3; ++d) {
        const std::uint64_t e = as_u64(arr[d], p);
        if (e == 0) throw ConfigError(p + ": extents must be positive");
        l.volume_shape[d] = static_cast<std::size_t>(e);
      }
    });
    read_real(s, "voxel_size_um", l.voxel_size_um);
    read_real(s, "root_radius_unit_mm", l.root_radius_unit_mm);
    s.finish();
  });

  root.read("images", [&](const json& v, const std::string& path) {
    Section s(v, path);
    ImageSynthParams& i = c.images;
    read_dist(s, "n_parenchyma_maps", i.n_parenchyma_maps);
    read_dist(s, "spline_ctrl_per_dim", i.spline_ctrl_per_dim);
    read_real(s, "parenchyma_intensity_var", i.parenchyma_intensity_var);
    read_dist(s, "vessel_texture_mean", i.vessel_texture_mean);
    read_real(s, "vessel_texture_var", i.vessel_texture_var);
    read_dist(s, "speckle_sd", i.speckle_sd);
    read_dist(s, "band_width", i.band_width);
    read_dist(s, "band_factor", i.band_factor);
    read_dist(s, "sphere_radius", i.sphere_radius);
    read_dist(s, "sphere_freq", i.sphere_freq);
    read_dist(s, "sphere_intensity", i.sphere_intensity);
    read_flag(s, "enable_banding", i.enable_banding);
    read_flag(s, "enable_vessel_texture", i.enable_vessel_texture);
    read_flag(s, "enable_spheres", i.enable_spheres);
    s.finish();
  });

  root.read("generation", [&](const json& v, const std::string& path) {
    Section s(v, path);
    GenerationSettings& g = c.generation;
    s.read("seed", [&](const json& x, const std::string& p) { g.seed = as_u64(x, p); });
    s.read("n", [&](const json& x, const std::string& p) {
      g.n = static_cast<std::size_t>(as_u64(x, p));
      if (g.n == 0) throw ConfigError(p + ": must be at least 1");
    });
    s.read("workers", [&](const json& x, const std::string& p) { g.workers = static_cast<std::size_t>(as_u64(x, p)); });
    s.read("compress", [&](const json& x, const std::string& p) { g.compress = as_bool(x, p); });
    s.finish();
  });
  root.finish();

  DistSpec& freq = c.images.sphere_freq;
  if (freq.family == Family::UniformCont && freq.a > freq.b) {
    spdlog::warn("images.sphere_freq bounds reversed ({}, {}); using ({}, {})", freq.a, freq.b, freq.b, freq.a);
    std::swap(freq.a, freq.b);
  }
  const LabelSynthParams& l = c.labels;
  const ImageSynthParams& i = c.images;
  const std::pair<const DistSpec*, const char*> checked[] = {
      {&l.tree_density, "labels.tree_density"},
      {&l.children_per_spline, "labels.children_per_spline"},
      {&l.max_tree_depth, "labels.max_tree_depth"},
      {&l.tortuosity, "labels.tortuosity"},
      {&l.root_radius, "labels.root_radius"},
      {&l.child_radius_factor, "labels.child_radius_factor"},
      {&l.radius_fluctuation, "labels.radius_fluctuation"},
      {&l.child_length_factor, "labels.child_length_factor"},
      {&i.n_parenchyma_maps, "images.n_parenchyma_maps"},
      {&i.spline_ctrl_per_dim, "images.spline_ctrl_per_dim"},
      {&i.vessel_texture_mean, "images.vessel_texture_mean"},
      {&i.speckle_sd, "images.speckle_sd"},
      {&i.band_width, "images.band_width"},
      {&i.band_factor, "images.band_factor"},
      {&i.sphere_radius, "images.sphere_radius"},
      {&i.sphere_intensity, "images.sphere_intensity"},
  };
  for (const auto& [d, name] : checked) require_ordered(*d, name);
  try {
    c.labels.validate();
    c.images.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

SynthConfig parse_config_text(std::string_view text, const std::optional<std::string>& preset_override) {
  json doc;
  try {
    doc = text.find_first_not_of(" \t\r\n") == std::string_view::npos ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(doc, preset_override);
}

SynthConfig parse_config(const std::filesystem::path& path, const std::optional<std::string>& preset_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), preset_override);
}

std::string serialize_config(const SynthConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace vsynth::io
