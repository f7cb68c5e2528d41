#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace albumgan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRunStatsFile = "run_stats.json";
inline constexpr const char* kDefaultApiUrl = "http://127.0.0.1:8765";

/// Runs one command line (args[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "600-605" or "1,4,10-12" -> seeds in order. Throws std::invalid_argument.
std::vector<std::uint64_t> parse_seeds(const std::string& text);

}  // namespace albumgan::cli
