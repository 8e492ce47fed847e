#pragma once

#include <string>
#include <vector>

namespace vsynth::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,  // bad flags or configuration
  kExitIo = 2,     // missing, unreadable or unwritable path
  kExitData = 3,   // data contract violation (shapes, coverage, checksums, malformed files)
};

/// Entry point of the vsynth tool. argv[0] is the program name.
int run(int argc, const char* const* argv);

/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args);

/// Parses "N", "X,Y,Z" or "XxYxZ". Throws std::invalid_argument.
std::vector<std::size_t> parse_shape(const std::string& text);

}  // namespace vsynth::cli
