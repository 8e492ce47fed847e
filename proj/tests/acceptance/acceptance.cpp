// Acceptance suite: one PASS/FAIL line per headline criterion.

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "vsynth/cli/commands.hpp"
#include "vsynth/dataset.hpp"
#include "vsynth/fusion.hpp"
#include "vsynth/geometry.hpp"
#include "vsynth/imagesynth.hpp"
#include "vsynth/io/checksum.hpp"
#include "vsynth/io/manifest.hpp"
#include "vsynth/io/nifti.hpp"
#include "vsynth/metrics.hpp"
#include "vsynth/vesselsynth.hpp"

using namespace vsynth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int vsynth_cli(std::vector<std::string> args) {
  args.push_back("-q");
  return cli::run(args);
}

std::vector<std::string> file_checksums(const io::DatasetManifest& m) {
  std::vector<std::string> out;
  for (const io::PatchEntry& e : m.patches) {
    out.push_back(e.label_path + "=" + e.label_checksum);
    out.push_back(e.image_path + "=" + e.image_checksum);
  }
  return out;
}

// gen-dataset --seed 7 --n 8, twice with one worker and once with four.
Outcome determinism(const fs::path& work) {
  std::vector<std::vector<std::string>> runs;
  double slowest = 0;
  for (const auto& [name, workers] : {std::pair{"det_w1_a", "1"}, std::pair{"det_w1_b", "1"}, std::pair{"det_w4", "4"}}) {
    const fs::path out = work / name;
    fs::remove_all(out);
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = vsynth_cli({"gen-dataset", "--seed", "7", "--n", "8", "--out", out.string(), "--workers", workers});
    slowest = std::max(slowest, seconds_since(t0));
    if (rc != 0) return {false, fmt::format("gen-dataset exited {} for {}", rc, name)};
    const io::DatasetManifest m = io::read_manifest(out / "manifest.json");
    const std::vector<std::string> bad = verify_files(m, out);
    if (!bad.empty()) return {false, fmt::format("{} files on disk differ from the manifest in {}", bad.size(), name)};
    runs.push_back(file_checksums(m));
  }
  const bool same = runs[0] == runs[1] && runs[0] == runs[2];
  const bool count_ok = runs[0].size() == 16;
  const bool fast = slowest < 300.0;
  return {same && count_ok && fast,
          fmt::format("{} files, repeat identical: {}, workers 1 vs 4 identical: {}, slowest run {:.1f} s (< 300 s)",
                      runs[0].size(), runs[0] == runs[1], runs[0] == runs[2], slowest)};
}

// Tree count and branch tortuosity over 500 default volumes. The tree
// sampler is the first consumer of each patch's label stream, so the forests
// are exactly those gen-dataset would rasterize.
Outcome tree_statistics() {
  const LabelSynthParams params;
  std::size_t two_or_three = 0;
  std::size_t branches = 0;
  std::size_t within = 0;
  std::vector<std::size_t> histogram(8, 0);
  const std::size_t volumes = 500;
  for (std::size_t i = 0; i < volumes; ++i) {
    Rng rng(patch_label_seed(2024, i));
    const std::vector<VesselTree> forest = sample_forest(params, rng);
    ++histogram[std::min<std::size_t>(forest.size(), 7)];
    two_or_three += forest.size() == 2 || forest.size() == 3;
    for (const VesselTree& t : forest) {
      for (const Branch& b : t.branches) {
        ++branches;
        within += std::abs(tortuosity(b.curve) / b.target_tortuosity - 1.0) <= 0.05;
      }
    }
  }
  const double frac_trees = static_cast<double>(two_or_three) / static_cast<double>(volumes);
  const double frac_tort = static_cast<double>(within) / static_cast<double>(branches);
  return {frac_trees >= 0.90 && frac_tort >= 0.99,
          fmt::format("trees in {{2,3}}: {:.1f}% (>= 90%; counts 1:{} 2:{} 3:{} 4+:{}), branches within 5% of target "
                      "tortuosity: {}/{} = {:.3f}% (>= 99%)",
                      100 * frac_trees, histogram[1], histogram[2], histogram[3],
                      histogram[4] + histogram[5] + histogram[6] + histogram[7], within, branches, 100 * frac_tort)};
}

// Straight r = 4 tube over L = 100 voxels, and nearest_point against a dense
// oracle.
Outcome rasterization() {
  constexpr double kPi = std::numbers::pi;
  const double r = 4.0;
  // The spline runs past both x faces of a 100-voxel-long lattice, so the
  // labeled set is the tube body without end caps.
  LabelVolume vol({100, 40, 40}, 20.0, 0);
  const Vec3 axis(0, 20.3, 19.6);
  Rasterizer(vol).add_branch(Spline3D::with_constant_radius({axis - Vec3(20, 0, 0), axis + Vec3(120, 0, 0)}, r));
  std::size_t labeled = 0;
  for (std::int32_t v : vol.voxels) labeled += v > 0;
  const double cylinder = kPi * r * r * 100.0;
  const double rel = static_cast<double>(labeled) / cylinder - 1.0;

  // The same tube standing free inside a larger lattice gains two half-ball caps.
  LabelVolume free_vol({128, 40, 40}, 20.0, 0);
  Rasterizer(free_vol).add_branch(Spline3D::with_constant_radius({Vec3(14, 20.3, 19.6), Vec3(114, 20.3, 19.6)}, r));
  std::size_t capsule_count = 0;
  for (std::int32_t v : free_vol.voxels) capsule_count += v > 0;
  const double capsule = cylinder + 4.0 / 3.0 * kPi * r * r * r;

  Rng rng(99);
  double worst = 0;
  const std::size_t pairs = 1000;
  const std::size_t dense = 100000;
  for (std::size_t k = 0; k < pairs; ++k) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 8));
    std::vector<Vec3> pts(n);
    for (Vec3& p : pts) p = Vec3(rng.uniform01(), rng.uniform01(), rng.uniform01()) * 64.0;
    const Spline3D s = Spline3D::with_constant_radius(pts, 1.0);
    const Vec3 q = Vec3(rng.uniform01(), rng.uniform01(), rng.uniform01()) * 96.0 - Vec3::Constant(16.0);
    double oracle = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dense; ++i) {
      oracle = std::min(oracle, (s.point(static_cast<double>(i) / static_cast<double>(dense - 1)) - q).norm());
    }
    worst = std::max(worst, std::abs(nearest_point(s, q).distance - oracle));
  }
  return {std::abs(rel) <= 0.05 && worst <= 1e-3,
          fmt::format("tube voxels {} vs pi r^2 L = {:.1f} ({:+.2f}%, within 5%); free-standing tube {} vs capsule {:.1f}; "
                      "nearest-point worst |error| vs 1e5-sample oracle over {} pairs: {:.2e} (<= 1e-3)",
                      labeled, cylinder, 100 * rel, capsule_count, capsule, pairs, worst)};
}

Outcome noise_moments() {
  IntensityVolume img({128, 128, 128}, 20.0, 1.0f);
  Rng rng(derive_seed(5, static_cast<std::uint64_t>(ImageStage::Speckle)));
  apply_speckle(img, 0.5, rng);
  double sum = 0;
  double sq = 0;
  for (float v : img.voxels) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(img.size());
  const double mean = sum / n;
  const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
  return {std::abs(mean - 1.0) <= 0.01 && std::abs(sd - 0.5) <= 0.01,
          fmt::format("mean {:.5f} (1.00 +- 0.01), sd {:.5f} (0.50 +- 0.01)", mean, sd)};
}

Outcome metric_oracles() {
  Rng rng(77);
  std::size_t pairs = 0;
  std::size_t exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    LabelVolume a({8, 8, 8}, 20.0, 0);
    LabelVolume b({8, 8, 8}, 20.0, 0);
    const double pa = rng.uniform01();
    const double pb = rng.uniform01();
    for (std::size_t i = 0; i < a.size(); ++i) {
      a.voxels[i] = rng.uniform01() < pa ? static_cast<std::int32_t>(rng.uniform_int(1, 3)) : 0;
      b.voxels[i] = rng.uniform01() < pb ? 1 : 0;
    }
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool p = a.voxels[i] > 0;
      const bool t = b.voxels[i] > 0;
      if (p && t) ++tp;
      if (!p && !t) ++tn;
      if (p && !t) ++fp;
      if (!p && t) ++fn;
    }
    const MetricsReport r = evaluate(a, b, nullptr, true);
    const double n = static_cast<double>(a.size());
    const double po = static_cast<double>(tp + tn) / n;
    const double pe = (static_cast<double>(tp + fp) / n) * (static_cast<double>(tp + fn) / n) +
                      (static_cast<double>(tn + fn) / n) * (static_cast<double>(tn + fp) / n);
    auto agrees = [](const std::optional<double>& got, bool defined, double want) {
      return defined ? (got.has_value() && std::abs(*got - want) <= 1e-12) : !got.has_value();
    };
    bool ok = r.counts == ConfusionCounts{tp, tn, fp, fn};
    ok = ok && agrees(r.dsc, 2 * tp + fp + fn > 0, 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn));
    ok = ok && agrees(r.fpr, fp + tn > 0, static_cast<double>(fp) / static_cast<double>(fp + tn));
    ok = ok && agrees(r.fnr, fn + tp > 0, static_cast<double>(fn) / static_cast<double>(fn + tp));
    ok = ok && agrees(r.kappa, pe < 1.0, (po - pe) / (1.0 - pe));
    ++pairs;
    exact += ok;
  }
  IntensityVolume pred({4, 1, 1}, 20.0, 0.0f);
  pred.voxels = {0.5f, 0.0f, 0.0f, 0.0f};
  LabelVolume truth({4, 1, 1}, 20.0, 0);
  truth.voxels = {1, 0, 0, 0};
  const double loss = dice_loss(pred, truth);
  const double expected = 1.0 - 5.0 / 5.25;
  return {exact == pairs && std::abs(loss - expected) <= 1e-9,
          fmt::format("{}/{} random 8^3 pairs with identical counts and metrics; dice loss example {:.10f} vs {:.10f} "
                      "(|diff| {:.1e} <= 1e-9)",
                      exact, pairs, loss, expected, std::abs(loss - expected))};
}

Outcome fusion_contract() {
  const WindowSpec spec;
  const Shape3 shape{256, 256, 256};
  PatchFuser fuser(shape, spec);
  const std::vector<float> patch(spec.patch_size * spec.patch_size * spec.patch_size, 0.7f);
  for (const Origin3& o : window_lattice(shape, spec)) fuser.add(o, patch);
  bool interior_64 = true;
  for (std::size_t z = 96; z < 160; ++z) {
    for (std::size_t y = 96; y < 160; ++y) {
      for (std::size_t x = 96; x < 160; ++x) interior_64 = interior_64 && fuser.count(x, y, z) == 64;
    }
  }
  const std::uint16_t center = fuser.count(128, 128, 128);
  const IntensityVolume out = fuser.finalize();
  double worst = 0;
  for (float v : out.voxels) worst = std::max(worst, std::abs(static_cast<double>(v) - static_cast<double>(0.7f)));
  const std::vector<double> w = weight_profile(spec);
  const double edge_err = std::max(std::abs(w.front() - std::sin(std::numbers::pi / 8)),
                                   std::abs(w.back() - std::sin(std::numbers::pi / 8)));
  return {interior_64 && center == 64 && fuser.max_count() == 64 && worst <= 1e-12 && edge_err <= 1e-9,
          fmt::format("{} patches; interior [96,160)^3 all at 64 contributions: {} (center {}, max {}); constant 0.7 "
                      "reproduced to {:.1e} (<= 1e-12); edge weight {:.9f}, error {:.1e} (<= 1e-9)",
                      fuser.patches_added(), interior_64, center, fuser.max_count(), worst, w.front(), edge_err)};
}

// The eight flag combinations from one seed.
Outcome ablation_grid(const fs::path& work) {
  std::vector<io::DatasetManifest> manifests;
  for (char c = 'A'; c <= 'H'; ++c) {
    const fs::path out = work / fmt::format("ablate_{}", c);
    fs::remove_all(out);
    const int rc = vsynth_cli(
        {"gen-dataset", "--seed", "11", "--n", "2", "--preset", std::string(1, c), "--out", out.string(), "--workers", "1"});
    if (rc != 0) return {false, fmt::format("gen-dataset --preset {} exited {}", c, rc)};
    manifests.push_back(io::read_manifest(out / "manifest.json"));
  }
  bool labels_identical = true;
  std::size_t distinct_pairs = 0;
  std::size_t pairs = 0;
  for (std::size_t p = 0; p < 2; ++p) {
    const fs::path ref = work / "ablate_A" / manifests[0].patches[p].label_path;
    const std::vector<std::uint8_t> ref_bytes = io::read_file(ref);
    for (std::size_t k = 1; k < 8; ++k) {
      const fs::path other = work / fmt::format("ablate_{}", static_cast<char>('A' + k)) / manifests[k].patches[p].label_path;
      labels_identical = labels_identical && io::read_file(other) == ref_bytes;
    }
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = i + 1; j < 8; ++j) {
        ++pairs;
        distinct_pairs += manifests[i].patches[p].image_checksum != manifests[j].patches[p].image_checksum;
      }
    }
  }
  return {labels_identical && distinct_pairs == pairs,
          fmt::format("label files byte-identical across A-H: {}; distinct image pairs {}/{} (2 patches x 28 pairs)",
                      labels_identical, distinct_pairs, pairs)};
}

Outcome format_round_trip(const fs::path& work) {
  const fs::path dir = work / "roundtrip";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(123);
  IntensityVolume f({128, 128, 128}, 20.0, 0.0f);
  for (float& v : f.voxels) v = static_cast<float>(rng.normal());
  LabelVolume l({128, 128, 128}, 20.0, 0);
  for (std::int32_t& v : l.voxels) v = static_cast<std::int32_t>(rng.uniform_int(0, 1 << 20));
  bool bitwise = true;
  for (const char* ext : {".nii", ".nii.gz"}) {
    io::write_volume(dir / fmt::format("f{}", ext), f);
    io::write_volume(dir / fmt::format("l{}", ext), l);
    bitwise = bitwise && io::payload_bytes(io::read_intensity(dir / fmt::format("f{}", ext))) == io::payload_bytes(f);
    bitwise = bitwise && io::read_labels(dir / fmt::format("l{}", ext)) == l;
  }

  // Regenerate the determinism dataset from its manifest after deleting every volume.
  const fs::path ds = work / "det_w1_a";
  const fs::path manifest = ds / "manifest.json";
  if (!fs::exists(manifest)) return {false, "determinism dataset missing"};
  const io::DatasetManifest m = io::read_manifest(manifest);
  fs::remove_all(ds / "labels");
  fs::remove_all(ds / "images");
  const int rc = vsynth_cli({"gen-dataset", "--from-manifest", manifest.string(), "--workers", "1"});
  const std::vector<std::string> bad = verify_files(m, ds);
  const std::size_t files = 2 * m.patches.size();
  return {bitwise && rc == 0 && bad.empty(),
          fmt::format("128^3 int32 and float32 payloads bitwise identical (.nii and .nii.gz): {}; regeneration exit {}, "
                      "{}/{} checksums reproduced",
                      bitwise, rc, files - bad.size(), files)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vsynth acceptance suite"};
  std::string work = (fs::temp_directory_path() / "vsynth_acceptance").string();
  app.add_option("--work", work, "Scratch directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);
  spdlog::set_level(spdlog::level::warn);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"determinism", [&] { return determinism(work); }},
      {"tree-statistics", tree_statistics},
      {"rasterization-accuracy", rasterization},
      {"noise-moments", noise_moments},
      {"metric-oracles", metric_oracles},
      {"fusion-contract", fusion_contract},
      {"ablation-grid", [&] { return ablation_grid(work); }},
      {"format-round-trip", [&] { return format_round_trip(work); }},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    fmt::print("{} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", name, o.detail, seconds_since(t0));
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
