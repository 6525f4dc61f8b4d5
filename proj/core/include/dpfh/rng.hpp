#pragma once

#include <cstdint>
#include <random>

namespace dpfh {

/// SplitMix64 finalizer; stateless mixing used to derive stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent RNG stream keyed by (seed, stream, substream). Replicate r of
/// a study draws from make_stream(seed, r, tag), so results do not depend on
/// scheduling or worker count.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t substream = 0) {
  const std::uint64_t s = mix64(mix64(mix64(seed) ^ stream) ^ (substream * 0xda942042e4dd58b5ULL));
  return std::mt19937_64(s);
}

}  // namespace dpfh
