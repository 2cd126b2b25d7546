#include "opsteer/random.hpp"

namespace opsteer {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, StreamTag tag,
                             std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

Rng make_substream(std::uint64_t seed, StreamTag tag, std::uint64_t a,
                   std::uint64_t b) {
  return Rng(substream_seed(seed, tag, a, b));
}

}  // namespace opsteer
