#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace synlungs {

// One splitmix64 step. Also used as the 64-bit mixing function for seed
// derivation: adding twins or stages never perturbs sibling streams.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64_next(s);
  s = h ^ b;
  return splitmix64_next(s);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

// Stage tags for stream derivation; values are part of the determinism
// contract and must not be reordered.
enum StageTag : std::uint64_t {
  kStageTwin = 1,
  kStagePhantom = 2,
  kStageLesionCount = 3,
  kStageLesionSize = 4,
  kStageLesionShape = 5,
  kStageLesionTexture = 6,
  kStagePlacement = 7,
  kStageAcquisition = 8,
  kStageLabel = 9,
  kStageMetadata = 10,
};

// Small deterministic stream: splitmix64 sequence. Satisfies
// UniformRandomBitGenerator. All distribution sampling below is hand-rolled
// so results do not depend on the standard library version.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<std::uint64_t>::max();
  }

  result_type operator()() { return splitmix64_next(state_); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal via Box-Muller (one value per call).
  double normal();

  // Gamma(shape, rate) by Marsaglia-Tsang squeeze.
  double gamma(double shape, double rate);

  // Exact Poisson: inversion for small means, Hormann PTRS otherwise.
  std::int64_t poisson(double mean);

 private:
  std::uint64_t state_;
};

}  // namespace synlungs
