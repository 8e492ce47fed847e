#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "small_config.hpp"
#include "vsynth/dataset.hpp"
#include "vsynth/errors.hpp"
#include "vsynth/io/checksum.hpp"
#include "vsynth/io/nifti.hpp"

using namespace vsynth;
using vsynth::test::small_config;
using vsynth::test::TempDir;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> checksums(const io::DatasetManifest& m) {
  std::vector<std::string> out;
  for (const io::PatchEntry& e : m.patches) {
    out.push_back(e.label_checksum);
    out.push_back(e.image_checksum);
  }
  return out;
}

}  // namespace

TEST_CASE("seeds and paths") {
  CHECK(patch_label_seed(7, 0) != patch_image_seed(7, 0));
  CHECK(patch_label_seed(7, 0) != patch_label_seed(7, 1));
  CHECK(patch_label_seed(7, 3) == derive_seed(7, 3, kLabelTag));
  CHECK(label_relpath(12, false) == "labels/patch_000012.nii");
  CHECK(image_relpath(3, true) == "images/patch_000003.nii.gz");
}

TEST_CASE("dataset generation is reproducible across worker counts") {
  TempDir a("ds_a");
  TempDir b("ds_b");
  const io::SynthConfig c = small_config(7, 4);
  const io::DatasetManifest ma = generate_dataset(c, a.path(), {true, true, 1});
  const io::DatasetManifest mb = generate_dataset(c, b.path(), {true, true, 3});
  CHECK(ma == mb);
  CHECK(io::read_manifest(a / "manifest.json") == ma);
  CHECK(verify_files(ma, a.path()).empty());
  CHECK(verify_files(ma, b.path()).empty());
  CHECK(ma.engine == "vsynth");
  CHECK(ma.global_seed == 7);
  CHECK(ma.config == c);
  for (const io::PatchEntry& e : ma.patches) {
    CHECK(fs::exists(a / e.label_path));
    CHECK(fs::exists(a / e.image_path));
    CHECK(e.label_seed == patch_label_seed(7, e.index));
    CHECK(e.tree_count >= 1);
    CHECK(e.branch_count >= e.tree_count);
  }
  const io::DatasetManifest other = generate_dataset(small_config(8, 4), b.path(), {true, true, 1});
  CHECK(checksums(other) != checksums(ma));
}

TEST_CASE("compressed output keeps payload checksums") {
  TempDir a("ds_plain");
  TempDir z("ds_gz");
  io::SynthConfig c = small_config(9, 1);
  const io::DatasetManifest plain = generate_dataset(c, a.path(), {true, true, 1});
  c.generation.compress = true;
  const io::DatasetManifest gz = generate_dataset(c, z.path(), {true, true, 1});
  CHECK(checksums(plain) == checksums(gz));
  CHECK(gz.patches[0].label_path == "labels/patch_000000.nii.gz");
}

TEST_CASE("regeneration from a manifest reproduces every file") {
  TempDir a("ds_regen");
  const io::DatasetManifest m = generate_dataset(small_config(11, 2), a.path(), {true, true, 1});
  fs::remove_all(a / "labels");
  fs::remove_all(a / "images");
  const RegenerationReport r = regenerate_from_manifest(a / "manifest.json", a.path(), 2);
  CHECK(r.mismatches.empty());
  CHECK(r.files_checked == 4);
  CHECK(verify_files(m, a.path()).empty());

  io::DatasetManifest tampered = m;
  tampered.patches[1].image_checksum = "0000000000000000";
  io::write_manifest(a / "tampered.json", tampered);
  TempDir b("ds_regen_b");
  const RegenerationReport bad = regenerate_from_manifest(a / "tampered.json", b.path(), 1);
  CHECK(bad.mismatches == std::vector<std::string>{"images/patch_000001.nii"});
}

TEST_CASE("labels offline, images later") {
  TempDir full("ds_full");
  TempDir split("ds_split");
  TempDir imgs("ds_split_images");
  const io::SynthConfig c = small_config(13, 2);
  const io::DatasetManifest both = generate_dataset(c, full.path(), {true, true, 1});
  const io::DatasetManifest labels_only = generate_dataset(c, split.path(), {true, false, 1});
  CHECK(labels_only.patches[0].image_path.empty());
  CHECK(labels_only.patches[0].label_checksum == both.patches[0].label_checksum);
  CHECK_FALSE(fs::exists(split / "images"));

  const io::DatasetManifest later = generate_images_from_manifest(split / "manifest.json", c.images, imgs.path(), 1);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(later.patches[i].image_checksum == both.patches[i].image_checksum);
    CHECK(fs::exists(imgs / later.patches[i].label_path));
  }
  CHECK(verify_files(io::read_manifest(imgs / "manifest.json"), imgs.path()).empty());
  // The written manifest regenerates too, with labels relocated under labels/.
  TempDir regen("ds_split_regen");
  CHECK(regenerate_from_manifest(imgs / "manifest.json", regen.path(), 1).mismatches.empty());

  // A label file that no longer matches its checksum is refused.
  io::write_volume(split / labels_only.patches[1].label_path, LabelVolume({32, 32, 32}, 20.0, 0));
  CHECK_THROWS_AS(generate_images_from_manifest(split / "manifest.json", c.images, imgs.path(), 1), ChecksumError);
}

TEST_CASE("ablation presets keep labels and change images") {
  TempDir a("ds_ablate_a");
  TempDir h("ds_ablate_h");
  io::SynthConfig ca = small_config(17, 2);
  io::SynthConfig ch = ca;
  io::apply_preset(ch, "ablate-H");
  const io::DatasetManifest ma = generate_dataset(ca, a.path(), {true, true, 1});
  const io::DatasetManifest mh = generate_dataset(ch, h.path(), {true, true, 1});
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(io::read_file(a / ma.patches[i].label_path) == io::read_file(h / mh.patches[i].label_path));
    CHECK(ma.patches[i].image_checksum != mh.patches[i].image_checksum);
  }
}

TEST_CASE("failures leave no manifest behind") {
  TempDir a("ds_fail");
  {
    std::ofstream(a / "manifest.json") << "{}";
    std::ofstream(a / "labels") << "not a directory";
  }
  CHECK_THROWS_AS(generate_dataset(small_config(), a.path(), {true, true, 1}), IoError);
  CHECK_FALSE(fs::exists(a / "manifest.json"));

  io::SynthConfig bad = small_config();
  bad.generation.n = 0;
  CHECK_THROWS_AS(generate_dataset(bad, a.path(), {true, true, 1}), ConfigError);
  CHECK_THROWS_AS(generate_dataset(small_config(), a.path(), {true, true, 0}), ConfigError);
}
