#ifndef PSTRAT_RNG_HPP
#define PSTRAT_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pstrat {

/// Deterministic random stream. The engine (mt19937_64) and every variate
/// transform in samplers.hpp are fixed algorithms, so a seed pins the full
/// draw sequence across runs and platforms. Substreams for parallel work
/// are derived by hashing a (master seed, path) tuple, never by sharing a
/// stream between tasks.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw strictly inside (0,1): 53-bit mantissa offset by half an ulp.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Hash-derives an independent substream from a master seed and a path of
  /// integer tags (e.g. {phase, chain}, {phase, draw, replicate}).
  static RngStream derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = master;
    for (std::uint64_t k : path) h = mix(h ^ (k + 0x9e3779b97f4a7c15ULL));
    return RngStream(mix(h));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace pstrat

#endif
