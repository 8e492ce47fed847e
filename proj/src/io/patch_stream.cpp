#include "vsynth/io/patch_stream.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>

#include "vsynth/errors.hpp"

namespace vsynth::io {

void write_patch_record(std::ostream& out, const Origin3& origin, std::span<const float> values) {
  for (std::size_t o : origin) {
    const auto v = static_cast<std::int32_t>(o);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw IoError("patch stream write failed");
}

PatchStreamReader::PatchStreamReader(std::istream& in, std::size_t patch_size) : in_(in), patch_size_(patch_size) {}

std::optional<PatchRecord> PatchStreamReader::next() {
  std::int32_t xyz[3];
  in_.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
  const std::streamsize got = in_.gcount();
  if (got == 0 && in_.eof()) return std::nullopt;
  if (got != static_cast<std::streamsize>(sizeof(xyz))) {
    throw LengthError("patch stream: record " + std::to_string(records_) + " has a truncated origin");
  }
  PatchRecord rec;
  for (int d = 0; d < 3; ++d) {
    if (xyz[d] < 0) throw DimensionError("patch stream: negative origin in record " + std::to_string(records_));
    rec.origin[d] = static_cast<std::size_t>(xyz[d]);
  }
  rec.values.resize(patch_size_ * patch_size_ * patch_size_);
  const auto bytes = static_cast<std::streamsize>(rec.values.size() * sizeof(float));
  in_.read(reinterpret_cast<char*>(rec.values.data()), bytes);
  if (in_.gcount() != bytes) {
    throw LengthError("patch stream: record " + std::to_string(records_) + " holds " +
                      std::to_string(in_.gcount()) + " payload bytes, expected " + std::to_string(bytes));
  }
  ++records_;
  return rec;
}

std::string patch_file_name(const Origin3& o, bool compress) {
  return "patch_" + std::to_string(o[0]) + "_" + std::to_string(o[1]) + "_" + std::to_string(o[2]) +
         (compress ? ".nii.gz" : ".nii");
}

std::optional<Origin3> parse_patch_file_name(std::string_view name) {
  constexpr std::string_view prefix = "patch_";
  if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
  std::string_view rest = name.substr(prefix.size());
  Origin3 o{};
  for (int d = 0; d < 3; ++d) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
    if (ec != std::errc() || ptr == rest.data()) return std::nullopt;
    o[d] = value;
    rest.remove_prefix(static_cast<std::size_t>(ptr - rest.data()));
    const char sep = d < 2 ? '_' : '.';
    if (rest.empty() || rest.front() != sep) return std::nullopt;
    if (d < 2) rest.remove_prefix(1);
  }
  if (rest != ".nii" && rest != ".nii.gz") return std::nullopt;
  return o;
}

std::vector<std::pair<Origin3, std::filesystem::path>> list_patch_files(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot list patch directory " + dir.string());
  std::vector<std::pair<Origin3, std::filesystem::path>> out;
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    if (auto o = parse_patch_file_name(entry.path().filename().string())) out.emplace_back(*o, entry.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first[2], a.first[1], a.first[0]) < std::tie(b.first[2], b.first[1], b.first[0]);
  });
  return out;
}

}  // namespace vsynth::io
