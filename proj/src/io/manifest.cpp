#include "vsynth/io/manifest.hpp"

#include <fstream>
#include <sstream>

#include "vsynth/errors.hpp"
#include "vsynth/io/checksum.hpp"

#ifndef VSYNTH_VERSION
#define VSYNTH_VERSION "0.0.0"
#endif

namespace vsynth::io {

using nlohmann::json;

std::string engine_version() { return VSYNTH_VERSION; }

namespace {

json nullable(const std::string& s) { return s.empty() ? json(nullptr) : json(s); }

std::string string_or_empty(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw ConfigError(std::string("manifest: '") + key + "' must be a string");
  return it->get<std::string>();
}

template <class T>
T required(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string("manifest: missing '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: bad '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const DatasetManifest& m) {
  json patches = json::array();
  for (const PatchEntry& p : m.patches) {
    patches.push_back(json{
        {"index", p.index},
        {"label_seed", p.label_seed},
        {"image_seed", p.image_seed},
        {"label_path", nullable(p.label_path)},
        {"image_path", nullable(p.image_path)},
        {"label_checksum", nullable(p.label_checksum)},
        {"image_checksum", nullable(p.image_checksum)},
        {"tree_count", p.tree_count},
        {"branch_count", p.branch_count},
    });
  }
  return json{
      {"engine", m.engine},
      {"engine_version", m.engine_version},
      {"global_seed", m.global_seed},
      {"prng", m.prng},
      {"checksum", m.checksum_algorithm},
      {"config", to_json(m.config)},
      {"patches", patches},
  };
}

DatasetManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("manifest: expected an object");
  DatasetManifest m;
  m.engine = required<std::string>(j, "engine");
  m.engine_version = required<std::string>(j, "engine_version");
  m.global_seed = required<std::uint64_t>(j, "global_seed");
  m.prng = required<std::string>(j, "prng");
  m.checksum_algorithm = required<std::string>(j, "checksum");
  if (m.checksum_algorithm != kChecksumAlgorithm) {
    throw ConfigError("manifest: unsupported checksum algorithm '" + m.checksum_algorithm + "'");
  }
  if (!j.contains("config")) throw ConfigError("manifest: missing 'config'");
  m.config = config_from_json(j.at("config"));
  if (!j.contains("patches") || !j.at("patches").is_array()) throw ConfigError("manifest: 'patches' must be an array");
  for (const json& p : j.at("patches")) {
    PatchEntry e;
    e.index = required<std::size_t>(p, "index");
    e.label_seed = required<std::uint64_t>(p, "label_seed");
    e.image_seed = required<std::uint64_t>(p, "image_seed");
    e.label_path = string_or_empty(p, "label_path");
    e.image_path = string_or_empty(p, "image_path");
    e.label_checksum = string_or_empty(p, "label_checksum");
    e.image_checksum = string_or_empty(p, "image_checksum");
    e.tree_count = required<std::size_t>(p, "tree_count");
    e.branch_count = required<std::size_t>(p, "branch_count");
    m.patches.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << to_json(m).dump(2) << "\n";
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move manifest into place at " + path.string());
  }
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace vsynth::io
