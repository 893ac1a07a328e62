#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ahrm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Default output root when neither --out nor the config file names one.
inline constexpr const char* kOutputRootEnv = "AHRM_OUTPUT_ROOT";

/// Accepts "3", "0..4" (inclusive) and comma lists of either.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

int run_cli(int argc, char** argv);

}  // namespace ahrm::cli
