#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vsynth/io/manifest.hpp"

namespace vsynth {

/// Sub-seed tags: patch i draws labels from derive_seed(seed, i, kLabelTag)
/// and images from derive_seed(seed, i, kImageTag).
inline constexpr std::uint64_t kLabelTag = 0x4c41424cULL;  // "LABL"
inline constexpr std::uint64_t kImageTag = 0x494d4147ULL;  // "IMAG"

std::uint64_t patch_label_seed(std::uint64_t global_seed, std::size_t index);
std::uint64_t patch_image_seed(std::uint64_t global_seed, std::size_t index);

std::string label_relpath(std::size_t index, bool compress);
std::string image_relpath(std::size_t index, bool compress);

struct PatchVolumes {
  LabelVolume labels;
  IntensityVolume image;
  std::size_t tree_count = 0;
  std::size_t branch_count = 0;
};

/// Labels (and, if requested, the image) of one patch from its sub-seeds.
PatchVolumes synthesize_patch(const io::SynthConfig& config, std::uint64_t label_seed, std::uint64_t image_seed,
                              bool with_image = true);

struct GenerateOptions {
  bool labels = true;
  bool images = true;
  std::size_t workers = 1;
};

/// Writes <out>/labels, <out>/images and <out>/manifest.json. The manifest is
/// written last and only on success; a stale one is removed first.
io::DatasetManifest generate_dataset(const io::SynthConfig& config, const std::filesystem::path& out,
                                     const GenerateOptions& options);

/// Synthesizes images for the label files listed in a manifest (offline
/// labels, later images). `images` replaces the manifest's image parameters.
/// Writes images under `out` and a manifest there.
io::DatasetManifest generate_images_from_manifest(const std::filesystem::path& manifest_path,
                                                  const ImageSynthParams& images, const std::filesystem::path& out,
                                                  std::size_t workers);

struct RegenerationReport {
  io::DatasetManifest manifest;  // as regenerated
  std::size_t files_checked = 0;
  std::vector<std::string> mismatches;  // relative paths whose checksum differs
};

/// Rebuilds every file named in the manifest under `out` from the recorded
/// seeds and configuration, then compares payload checksums.
RegenerationReport regenerate_from_manifest(const std::filesystem::path& manifest_path,
                                            const std::filesystem::path& out, std::size_t workers);

/// Recomputes checksums of the files a manifest points to (relative to its directory).
std::vector<std::string> verify_files(const io::DatasetManifest& manifest, const std::filesystem::path& root);

}  // namespace vsynth
