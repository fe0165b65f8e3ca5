#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace jointnerf {

// Independent random streams derived from one run seed, so that e.g.
// toggling ray jitter never perturbs weight initialisation.
enum class RngPurpose : uint64_t {
  kInit = 1,
  kPixels = 2,
  kJitter = 3,
  kScene = 4,
  kAlign = 5,
};

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream keyed by (seed, purpose, counters...). Counters index e.g. phase,
// epoch, image and chunk so any step can be replayed in isolation.
inline std::mt19937_64 MakeRng(uint64_t seed, RngPurpose purpose,
                               std::initializer_list<uint64_t> counters = {}) {
  uint64_t h = SplitMix64(seed ^ SplitMix64(static_cast<uint64_t>(purpose)));
  for (uint64_t c : counters) h = SplitMix64(h ^ SplitMix64(c + 0x632be59bd9b4e019ULL));
  return std::mt19937_64(h);
}

}  // namespace jointnerf
