#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace routeseq::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kNumerical = 3;

// Sub-seeds derived from the single --seed flag.
inline constexpr std::uint64_t kDatasetSeedOffset = 0;
inline constexpr std::uint64_t kInitSeedOffset = 1;
inline constexpr std::uint64_t kShuffleSeedOffset = 2;

// Parses and runs one command line. Never throws; returns the exit code.
int run(const std::vector<std::string>& args);

// `key=value` lines, '#' comments and blank lines allowed. Keys are option
// names without the leading dashes; underscores read as dashes. Throws
// std::runtime_error on malformed lines.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path);

}  // namespace routeseq::cli
