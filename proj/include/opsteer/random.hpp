#pragma once

#include <cstdint>
#include <random>

namespace opsteer {

using Rng = std::mt19937_64;

// Independent purposes that draw random numbers during an experiment. Each
// purpose gets its own family of substreams so that, e.g., changing the
// number of planning samples never perturbs the environment noise.
enum class StreamTag : std::uint64_t {
  kInitialState = 1,
  kActiveSet = 2,
  kEnvironment = 3,
  kRollout = 4,
  kExecution = 5,
};

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Seed for the substream addressed by (seed, tag, a, b). Pure function of
// its arguments, so substreams can be created in any order on any thread.
std::uint64_t substream_seed(std::uint64_t seed, StreamTag tag,
                             std::uint64_t a = 0, std::uint64_t b = 0);

Rng make_substream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                   std::uint64_t b = 0);

// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace opsteer
