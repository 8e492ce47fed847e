#include "vsynth/cli/commands.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <optional>

#include "vsynth/dataset.hpp"
#include "vsynth/errors.hpp"
#include "vsynth/fusion.hpp"
#include "vsynth/io/checksum.hpp"
#include "vsynth/io/config.hpp"
#include "vsynth/io/manifest.hpp"
#include "vsynth/io/nifti.hpp"
#include "vsynth/io/patch_stream.hpp"
#include "vsynth/metrics.hpp"
#include "vsynth/parallel.hpp"

namespace vsynth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void setup_logging(int verbosity) {
  auto logger = spdlog::get("vsynth");
  if (!logger) {
    logger = spdlog::stderr_color_mt("vsynth");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_level(verbosity > 0 ? spdlog::level::debug : verbosity < 0 ? spdlog::level::warn : spdlog::level::info);
}

// Flags shared by the generation commands.
struct GenFlags {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string preset;
  std::string out;
  std::optional<std::size_t> n;
  std::optional<std::size_t> workers;
  bool compress = false;
};

void add_gen_flags(CLI::App* app, GenFlags& f, bool with_n) {
  app->add_option("--seed", f.seed, "Global seed (u64)");
  app->add_option("--config", f.config, "JSON configuration file");
  app->add_option("--preset", f.preset, "A..H, ablate-A..ablate-H or simple");
  app->add_option("--out", f.out, "Output directory");
  if (with_n) app->add_option("--n", f.n, "Number of patches")->check(CLI::PositiveNumber);
  app->add_option("--workers", f.workers, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);
  app->add_flag("--compress", f.compress, "Write .nii.gz");
}

io::SynthConfig resolve_config(const GenFlags& f) {
  const std::optional<std::string> preset = f.preset.empty() ? std::nullopt : std::optional(f.preset);
  io::SynthConfig c = f.config.empty() ? io::parse_config_text("", preset) : io::parse_config(f.config, preset);
  if (f.seed) c.generation.seed = *f.seed;
  if (f.n) c.generation.n = *f.n;
  if (f.compress) c.generation.compress = true;
  return c;
}

std::size_t resolve_workers(const GenFlags& f, const io::SynthConfig& c) {
  if (f.workers) return *f.workers;
  if (c.generation.workers > 0) return c.generation.workers;
  return default_worker_count();
}

int cmd_generate(const GenFlags& f, bool labels, bool images, const std::string& from_manifest) {
  if (!from_manifest.empty()) {
    const fs::path src = from_manifest;
    const fs::path out = f.out.empty() ? (src.parent_path().empty() ? fs::path(".") : src.parent_path()) : fs::path(f.out);
    const std::size_t workers = f.workers.value_or(default_worker_count());
    if (f.seed || f.n || !f.config.empty() || !f.preset.empty()) {
      spdlog::warn("--seed/--n/--config/--preset are ignored with --from-manifest");
    }
    const RegenerationReport r = regenerate_from_manifest(src, out, workers);
    const fs::path out_manifest = out / "manifest.json";
    if (fs::absolute(out_manifest).lexically_normal() != fs::absolute(src).lexically_normal() && r.mismatches.empty()) {
      io::write_manifest(out_manifest, r.manifest);
    }
    if (!r.mismatches.empty()) {
      for (const std::string& m : r.mismatches) spdlog::error("checksum mismatch: {}", m);
      spdlog::error("{} of {} regenerated files differ from the manifest", r.mismatches.size(), r.files_checked);
      return kExitData;
    }
    spdlog::info("all {} regenerated files match the manifest", r.files_checked);
    return kExitOk;
  }
  if (f.out.empty()) throw CLI::RequiredError("--out");
  const io::SynthConfig c = resolve_config(f);
  GenerateOptions opt;
  opt.labels = labels;
  opt.images = images;
  opt.workers = resolve_workers(f, c);
  generate_dataset(c, f.out, opt);
  return kExitOk;
}

int cmd_gen_images(const GenFlags& f, const std::string& manifest) {
  const fs::path src = manifest;
  const fs::path out = f.out.empty() ? (src.parent_path().empty() ? fs::path(".") : src.parent_path()) : fs::path(f.out);
  ImageSynthParams images = io::read_manifest(src).config.images;
  if (!f.config.empty() || !f.preset.empty()) images = resolve_config(f).images;
  generate_images_from_manifest(src, images, out, f.workers.value_or(default_worker_count()));
  return kExitOk;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_cell(const std::optional<double>& v) { return v ? fmt::format("{:.10g}", *v) : std::string(); }

// Binary view of any volume file: integer data as value > 0, float data as
// value >= threshold.
LabelVolume read_binary(const fs::path& path, double threshold) {
  const io::Decoded d = io::read_raw(path);
  if (d.header.kind() == io::ValueKind::Labels) return foreground(io::to_labels(d));
  return threshold_mask(io::to_intensity(d), threshold);
}

struct EvalFlags {
  std::string pred;
  std::string truth;
  std::string mask;
  std::string rater2;
  std::string report;
  std::string csv;
  bool kappa = false;
  double threshold = 0.5;
};

int cmd_evaluate(const EvalFlags& f) {
  // Everything is read before anything is written.
  const LabelVolume pred = read_binary(f.pred, f.threshold);
  const LabelVolume truth = read_binary(f.truth, f.threshold);
  std::optional<LabelVolume> mask;
  if (!f.mask.empty()) mask = read_binary(f.mask, f.threshold);
  std::optional<LabelVolume> rater2;
  if (!f.rater2.empty()) rater2 = read_binary(f.rater2, f.threshold);
  const LabelVolume* m = mask ? &*mask : nullptr;

  const MetricsReport r = evaluate(pred, truth, m, f.kappa);
  json rec{
      {"pred", f.pred},
      {"truth", f.truth},
      {"mask", f.mask.empty() ? json(nullptr) : json(f.mask)},
      {"counts", {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp}, {"fn", r.counts.fn}}},
      {"dsc", optional_json(r.dsc)},
      {"fpr", optional_json(r.fpr)},
      {"fnr", optional_json(r.fnr)},
  };
  if (f.kappa) rec["kappa"] = optional_json(r.kappa);
  if (rater2) {
    json pairs = json::array();
    const std::pair<std::string, const LabelVolume*> raters[] = {{"pred", &pred}, {"truth", &truth}, {"rater2", &*rater2}};
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = a + 1; b < 3; ++b) {
        pairs.push_back({{"a", raters[a].first},
                         {"b", raters[b].first},
                         {"kappa", optional_json(cohens_kappa(*raters[a].second, *raters[b].second, m))}});
      }
    }
    rec["kappa_pairs"] = pairs;
  }

  const std::string text = rec.dump(2);
  if (!f.report.empty()) {
    std::ofstream out(f.report, std::ios::trunc);
    if (!out) throw IoError("cannot write report " + f.report);
    out << text << "\n";
    if (!out) throw IoError("write failed: " + f.report);
  }
  if (!f.csv.empty()) {
    const bool fresh = !fs::exists(f.csv) || fs::file_size(f.csv) == 0;
    std::ofstream out(f.csv, std::ios::app);
    if (!out) throw IoError("cannot append to " + f.csv);
    if (fresh) out << "pred,truth,mask,tp,tn,fp,fn,dsc,fpr,fnr,kappa\n";
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", f.pred, f.truth, f.mask, r.counts.tp, r.counts.tn,
                       r.counts.fp, r.counts.fn, csv_cell(r.dsc), csv_cell(r.fpr), csv_cell(r.fnr),
                       csv_cell(r.kappa));
    if (!out) throw IoError("write failed: " + f.csv);
  }
  std::cout << text << std::endl;
  return kExitOk;
}

struct FuseFlags {
  std::string patches;
  std::string stream;
  std::string shape;
  std::size_t patch_size = 128;
  std::size_t step = 32;
  std::string out;
  std::string mask_out;
  double threshold = 0.5;
  double voxel_size_um = 20.0;
};

int cmd_fuse(const FuseFlags& f) {
  std::vector<std::size_t> s;
  try {
    s = parse_shape(f.shape);
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("--shape", e.what());
  }
  const Shape3 shape{s[0], s[1], s[2]};
  if (f.step > f.patch_size) throw CLI::ValidationError("--step", "must not exceed --patch-size");
  const WindowSpec spec{f.patch_size, f.step};
  for (std::size_t e : shape) {
    if (e < spec.patch_size) {
      throw DimensionError("volume extent " + std::to_string(e) + " is smaller than the patch size");
    }
  }
  PatchFuser fuser(shape, spec, f.voxel_size_um);
  const std::size_t p3 = spec.patch_size * spec.patch_size * spec.patch_size;

  if (!f.patches.empty()) {
    const auto files = io::list_patch_files(f.patches);
    if (files.empty()) throw IoError("no patch_<x>_<y>_<z>.nii[.gz] files in " + f.patches);
    for (const auto& [origin, path] : files) {
      const IntensityVolume patch = io::read_intensity(path);
      if (patch.size() != p3) {
        throw DimensionError(path.string() + " has shape " + shape_string(patch.shape) + ", expected " +
                             std::to_string(spec.patch_size) + "^3");
      }
      fuser.add(origin, patch.voxels);
    }
  } else {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (f.stream != "-") {
      file.open(f.stream, std::ios::binary);
      if (!file) throw IoError("cannot open patch stream " + f.stream);
      in = &file;
    }
    io::PatchStreamReader reader(*in, spec.patch_size);
    while (auto rec = reader.next()) fuser.add(rec->origin, rec->values);
  }

  spdlog::info("{} patches fused; contributions at center voxel: {}, max: {}", fuser.patches_added(),
               fuser.count(shape[0] / 2, shape[1] / 2, shape[2] / 2), fuser.max_count());
  const IntensityVolume fused = fuser.finalize();
  io::write_volume(f.out, fused);
  spdlog::info("wrote {}", f.out);
  if (!f.mask_out.empty()) {
    io::write_volume(f.mask_out, threshold_mask(fused, f.threshold));
    spdlog::info("wrote mask {} (threshold {})", f.mask_out, f.threshold);
  }
  return kExitOk;
}

struct ComponentFlags {
  std::string in;
  std::string out;
  std::string largest_out;
  std::string report;
  int connectivity = 26;
  std::size_t largest = 8;
  double threshold = 0.5;
};

int cmd_components(const ComponentFlags& f) {
  const auto conn = connectivity_from_int(f.connectivity);
  if (!conn) throw CLI::ValidationError("--connectivity", "must be 6, 18 or 26");
  const LabelVolume mask = read_binary(f.in, f.threshold);
  const ComponentLabeling cc = connected_components(mask, *conn);
  if (!f.out.empty()) io::write_volume(f.out, cc.labels);
  if (!f.largest_out.empty()) io::write_volume(f.largest_out, largest_components(cc, f.largest));
  json rec{{"input", f.in}, {"connectivity", f.connectivity}, {"count", cc.sizes.size()}, {"sizes", cc.sizes}};
  if (!f.report.empty()) {
    std::ofstream out(f.report, std::ios::trunc);
    if (!out) throw IoError("cannot write report " + f.report);
    out << rec.dump(2) << "\n";
  }
  spdlog::info("{} components at {}-connectivity", cc.sizes.size(), f.connectivity);
  const std::size_t shown = std::min(cc.sizes.size(), f.largest);
  for (std::size_t i = 0; i < shown; ++i) std::cout << (i + 1) << "\t" << cc.sizes[i] << "\n";
  std::cout.flush();
  return kExitOk;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const CLI::Error& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    spdlog::error("io: {}", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("io: {}", e.what());
    return kExitIo;
  } catch (const CoverageError& e) {
    spdlog::error("coverage: {}", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    // Format, length, dimension, domain and checksum violations.
    spdlog::error("{}", e.what());
    return kExitData;
  }
}

}  // namespace

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) throw std::invalid_argument("bad shape '" + text + "'");
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(token, &pos);
    if (pos != token.size() || v == 0) throw std::invalid_argument("bad shape '" + text + "'");
    out.push_back(static_cast<std::size_t>(v));
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == 'x' || c == 'X') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  if (out.size() == 1) out = {out[0], out[0], out[0]};
  if (out.size() != 3) throw std::invalid_argument("shape needs 1 or 3 extents: '" + text + "'");
  return out;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Synthetic vascular volume engine: labels, images, metrics and patch fusion", "vsynth"};
  app.require_subcommand(1);
  app.fallthrough();  // -v/-q are accepted after the subcommand too
  app.set_version_flag("--version", io::engine_version());
  int verbosity = 0;
  app.add_flag("-v,--verbose", [&](std::int64_t) { verbosity = 1; }, "Debug logging");
  app.add_flag("-q,--quiet", [&](std::int64_t) { verbosity = -1; }, "Warnings and errors only");

  GenFlags gen_labels;
  auto* c_labels = app.add_subcommand("gen-labels", "Generate label volumes and a manifest");
  add_gen_flags(c_labels, gen_labels, true);

  GenFlags gen_images;
  std::string images_manifest;
  auto* c_images = app.add_subcommand("gen-images", "Synthesize images for the labels of a manifest");
  add_gen_flags(c_images, gen_images, false);
  c_images->add_option("--from-manifest", images_manifest, "Manifest written by gen-labels or gen-dataset")
      ->required();

  GenFlags gen_dataset;
  std::string dataset_manifest;
  auto* c_dataset = app.add_subcommand("gen-dataset", "Generate label and image pairs with a manifest");
  add_gen_flags(c_dataset, gen_dataset, true);
  c_dataset->add_option("--from-manifest", dataset_manifest,
                        "Regenerate every file of this manifest into --out and verify checksums");

  EvalFlags eval;
  auto* c_eval = app.add_subcommand("evaluate", "DSC, FPR, FNR and optional kappa of a prediction");
  c_eval->add_option("--pred", eval.pred, "Predicted mask or probability volume")->required();
  c_eval->add_option("--truth", eval.truth, "Reference mask")->required();
  c_eval->add_option("--mask", eval.mask, "Restrict counts to mask > 0");
  c_eval->add_option("--rater2", eval.rater2, "Second rater; adds kappa for every pair of raters");
  c_eval->add_option("--report", eval.report, "Write the JSON record here");
  c_eval->add_option("--csv", eval.csv, "Append a row to this CSV file");
  c_eval->add_flag("--kappa", eval.kappa, "Include Cohen's kappa of pred vs truth");
  c_eval->add_option("--threshold", eval.threshold, "Binarization threshold for float volumes")->capture_default_str();

  FuseFlags fuse;
  auto* c_fuse = app.add_subcommand("fuse", "Sine-weighted fusion of sliding-window patch predictions");
  auto* o_patches = c_fuse->add_option("--patches", fuse.patches, "Directory of patch_<x>_<y>_<z>.nii[.gz] files");
  auto* o_stream = c_fuse->add_option("--stream", fuse.stream, "Binary patch stream file, '-' for stdin");
  o_patches->excludes(o_stream);
  c_fuse->add_option("--shape", fuse.shape, "Volume shape: N, X,Y,Z or XxYxZ")->required();
  c_fuse->add_option("--patch-size", fuse.patch_size, "Window edge length")->capture_default_str()->check(CLI::PositiveNumber);
  c_fuse->add_option("--step", fuse.step, "Window step")->capture_default_str()->check(CLI::PositiveNumber);
  c_fuse->add_option("--out", fuse.out, "Fused probability volume")->required();
  c_fuse->add_option("--mask-out", fuse.mask_out, "Also write the thresholded mask here");
  c_fuse->add_option("--threshold", fuse.threshold, "Mask threshold (value >= threshold)")->capture_default_str();
  c_fuse->add_option("--voxel-size", fuse.voxel_size_um, "Voxel size in micrometres")->capture_default_str();

  ComponentFlags comp;
  auto* c_comp = app.add_subcommand("components", "Connected components of a binary mask");
  c_comp->add_option("--in", comp.in, "Mask volume")->required();
  c_comp->add_option("--out", comp.out, "Write component ids (1 = largest)");
  c_comp->add_option("--largest", comp.largest, "Number of largest components to keep")->capture_default_str();
  c_comp->add_option("--largest-out", comp.largest_out, "Write a mask of the largest components");
  c_comp->add_option("--connectivity", comp.connectivity, "6, 18 or 26")->capture_default_str();
  c_comp->add_option("--threshold", comp.threshold, "Binarization threshold for float volumes")->capture_default_str();
  c_comp->add_option("--report", comp.report, "Write component sizes as JSON");

  GenFlags show;
  auto* c_show = app.add_subcommand("show-config", "Print the resolved configuration");
  c_show->add_option("--config", show.config, "JSON configuration file");
  c_show->add_option("--preset", show.preset, "A..H, ablate-A..ablate-H or simple");
  c_show->add_option("--out", show.out, "Write to this file instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    setup_logging(0);
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  setup_logging(verbosity);

  return guarded([&]() -> int {
    if (c_labels->parsed()) return cmd_generate(gen_labels, true, false, "");
    if (c_images->parsed()) return cmd_gen_images(gen_images, images_manifest);
    if (c_dataset->parsed()) return cmd_generate(gen_dataset, true, true, dataset_manifest);
    if (c_eval->parsed()) return cmd_evaluate(eval);
    if (c_fuse->parsed()) {
      if (fuse.patches.empty() && fuse.stream.empty()) throw CLI::RequiredError("--patches or --stream");
      return cmd_fuse(fuse);
    }
    if (c_comp->parsed()) return cmd_components(comp);
    if (c_show->parsed()) {
      const std::string text = io::serialize_config(resolve_config(show));
      if (show.out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(show.out, std::ios::trunc);
        if (!out) throw IoError("cannot write " + show.out);
        out << text;
      }
      return kExitOk;
    }
    return kExitUsage;
  });
}

}  // namespace vsynth::cli
