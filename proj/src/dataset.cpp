#include "vsynth/dataset.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <mutex>

#include "vsynth/errors.hpp"
#include "vsynth/io/checksum.hpp"
#include "vsynth/io/nifti.hpp"
#include "vsynth/parallel.hpp"

namespace vsynth {

namespace fs = std::filesystem;

namespace {

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

io::DatasetManifest manifest_header(const io::SynthConfig& config) {
  io::DatasetManifest m;
  m.engine_version = io::engine_version();
  m.global_seed = config.generation.seed;
  m.checksum_algorithm = io::kChecksumAlgorithm;
  m.config = config;
  return m;
}

void remove_stale_manifest(const fs::path& path) {
  std::error_code ec;
  if (fs::exists(path, ec)) {
    spdlog::info("removing stale manifest {}", path.string());
    fs::remove(path, ec);
    if (ec) throw IoError("cannot remove stale manifest " + path.string());
  }
}

std::string relative_to(const fs::path& target, const fs::path& base) {
  return fs::relative(fs::absolute(target), fs::absolute(base)).generic_string();
}

}  // namespace

std::uint64_t patch_label_seed(std::uint64_t global_seed, std::size_t index) {
  return derive_seed(global_seed, index, kLabelTag);
}

std::uint64_t patch_image_seed(std::uint64_t global_seed, std::size_t index) {
  return derive_seed(global_seed, index, kImageTag);
}

std::string label_relpath(std::size_t index, bool compress) {
  return fmt::format("labels/patch_{:06d}.nii{}", index, compress ? ".gz" : "");
}

std::string image_relpath(std::size_t index, bool compress) {
  return fmt::format("images/patch_{:06d}.nii{}", index, compress ? ".gz" : "");
}

PatchVolumes synthesize_patch(const io::SynthConfig& config, std::uint64_t label_seed, std::uint64_t image_seed,
                              bool with_image) {
  PatchVolumes out;
  Rng rng(label_seed);
  LabelSynthesis ls = synthesize_label_volume(config.labels, rng);
  out.tree_count = ls.trees.size();
  out.branch_count = ls.branch_count();
  out.labels = std::move(ls.volume);
  if (with_image) out.image = synthesize_image(out.labels, config.images, image_seed);
  return out;
}

io::DatasetManifest generate_dataset(const io::SynthConfig& config, const fs::path& out,
                                     const GenerateOptions& options) {
  const std::size_t n = config.generation.n;
  if (n == 0) throw ConfigError("patch count must be at least 1");
  if (options.workers == 0) throw ConfigError("worker count must be at least 1");
  config.labels.validate();
  config.images.validate();

  const fs::path manifest_path = out / "manifest.json";
  make_dir(out);
  remove_stale_manifest(manifest_path);
  if (options.labels) make_dir(out / "labels");
  if (options.images) make_dir(out / "images");

  io::DatasetManifest m = manifest_header(config);
  m.patches.resize(n);
  const bool gz = config.generation.compress;
  std::mutex log_mutex;
  std::size_t finished = 0;
  const auto t_all = std::chrono::steady_clock::now();

  parallel_for(n, options.workers, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    io::PatchEntry& e = m.patches[i];
    e.index = i;
    e.label_seed = patch_label_seed(config.generation.seed, i);
    e.image_seed = patch_image_seed(config.generation.seed, i);
    const PatchVolumes v = synthesize_patch(config, e.label_seed, e.image_seed, options.images);
    e.tree_count = v.tree_count;
    e.branch_count = v.branch_count;
    if (options.labels) {
      e.label_path = label_relpath(i, gz);
      io::write_volume(out / e.label_path, v.labels);
      e.label_checksum = io::payload_checksum(v.labels);
    }
    if (options.images) {
      e.image_path = image_relpath(i, gz);
      io::write_volume(out / e.image_path, v.image);
      e.image_checksum = io::payload_checksum(v.image);
    }
    std::lock_guard lock(log_mutex);
    ++finished;
    spdlog::info("patch {} done ({}/{}) in {:.2f} s: {} trees, {} branches", i, finished, n, seconds_since(t0),
                 v.tree_count, v.branch_count);
  });

  io::write_manifest(manifest_path, m);
  spdlog::info("{} patches in {:.2f} s; manifest {}", n, seconds_since(t_all), manifest_path.string());
  return m;
}

io::DatasetManifest generate_images_from_manifest(const fs::path& manifest_path, const ImageSynthParams& images,
                                                  const fs::path& out, std::size_t workers) {
  if (workers == 0) throw ConfigError("worker count must be at least 1");
  images.validate();
  io::DatasetManifest m = io::read_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  make_dir(out);
  make_dir(out / "images");
  const fs::path out_manifest = out / "manifest.json";

  m.config.images = images;
  const bool gz = m.config.generation.compress;
  std::mutex log_mutex;
  parallel_for(m.patches.size(), workers, [&](std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    io::PatchEntry& e = m.patches[k];
    if (e.label_path.empty()) throw ConfigError(fmt::format("manifest patch {} has no label file", e.index));
    const fs::path label_file = root / e.label_path;
    const LabelVolume labels = io::read_labels(label_file);
    if (!e.label_checksum.empty() && io::payload_checksum(labels) != e.label_checksum) {
      throw ChecksumError("label file " + label_file.string() + " does not match its manifest checksum");
    }
    const IntensityVolume image = synthesize_image(labels, images, e.image_seed);
    e.image_path = image_relpath(e.index, gz);
    io::write_volume(out / e.image_path, image);
    e.image_checksum = io::payload_checksum(image);
    e.label_path = relative_to(label_file, out);
    std::lock_guard lock(log_mutex);
    spdlog::info("image {} done in {:.2f} s", e.index, seconds_since(t0));
  });
  if (fs::absolute(out_manifest).lexically_normal() != fs::absolute(manifest_path).lexically_normal()) {
    remove_stale_manifest(out_manifest);
  }
  io::write_manifest(out_manifest, m);
  return m;
}

RegenerationReport regenerate_from_manifest(const fs::path& manifest_path, const fs::path& out, std::size_t workers) {
  if (workers == 0) throw ConfigError("worker count must be at least 1");
  const io::DatasetManifest original = io::read_manifest(manifest_path);
  make_dir(out);
  RegenerationReport report;
  report.manifest = original;
  std::mutex mutex;

  parallel_for(original.patches.size(), workers, [&](std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    const io::PatchEntry& e = original.patches[k];
    io::PatchEntry& r = report.manifest.patches[k];
    const bool with_image = !e.image_path.empty();
    const PatchVolumes v = synthesize_patch(original.config, e.label_seed, e.image_seed, with_image);
    r.tree_count = v.tree_count;
    r.branch_count = v.branch_count;
    std::vector<std::string> bad;
    std::size_t checked = 0;
    auto store = [&](const std::string& rel, const auto& volume, const std::string& expected, std::string& actual,
                     std::string& path_out) {
      // Label paths may point outside the dataset (gen-images into another
      // directory); those are regenerated under labels/ instead.
      const std::string target = rel.rfind("..", 0) == 0 ? label_relpath(e.index, original.config.generation.compress) : rel;
      path_out = target;
      make_dir((out / target).parent_path());
      io::write_volume(out / target, volume);
      actual = io::payload_checksum(volume);
      ++checked;
      if (actual != expected) bad.push_back(target);
    };
    if (!e.label_path.empty()) store(e.label_path, v.labels, e.label_checksum, r.label_checksum, r.label_path);
    if (with_image) store(e.image_path, v.image, e.image_checksum, r.image_checksum, r.image_path);
    if (r.tree_count != e.tree_count || r.branch_count != e.branch_count) {
      bad.push_back(fmt::format("patch {} tree/branch counts", e.index));
    }
    std::lock_guard lock(mutex);
    report.files_checked += checked;
    report.mismatches.insert(report.mismatches.end(), bad.begin(), bad.end());
    spdlog::info("regenerated patch {} in {:.2f} s{}", e.index, seconds_since(t0), bad.empty() ? "" : " (MISMATCH)");
  });
  std::sort(report.mismatches.begin(), report.mismatches.end());
  return report;
}

std::vector<std::string> verify_files(const io::DatasetManifest& manifest, const fs::path& root) {
  std::vector<std::string> bad;
  for (const io::PatchEntry& e : manifest.patches) {
    if (!e.label_path.empty() && io::file_payload_checksum(root / e.label_path) != e.label_checksum) {
      bad.push_back(e.label_path);
    }
    if (!e.image_path.empty() && io::file_payload_checksum(root / e.image_path) != e.image_checksum) {
      bad.push_back(e.image_path);
    }
  }
  return bad;
}

}  // namespace vsynth
