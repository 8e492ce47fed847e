#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <doctest.h>

namespace vsynth::test {

// Fresh scratch directory, removed again on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    const char* env = std::getenv("VSYNTH_TEST_TMP");
    const std::filesystem::path base = env ? env : std::filesystem::temp_directory_path() / "vsynth_tests";
    path_ = base / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace vsynth::test
