#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "opsteer/policies.hpp"

namespace opsteer {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct RunRequest {
  std::string scenario = "steering";
  std::vector<PolicyKind> policies;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;
};

// Accepts "3", "0,2,5" and ranges such as "0-4" (inclusive), mixed freely.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Entry point of the opinion_steer tool. Returns 0 on success, 2 on usage
// errors (nothing is written) and 1 on runtime failures.
int parse_and_run(int argc, const char* const* argv, std::ostream& out,
                  std::ostream& err);

}  // namespace opsteer
