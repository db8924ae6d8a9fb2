#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace stratmc {

/// Identifies one reproducible random stream. Identical (seed, stream)
/// pairs reproduce identical draw sequences bit-for-bit on a platform.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// splitmix64 (Steele/Lea/Flood). Tiny state, full-avalanche output,
/// cheap to derive independent sub-streams from by reseeding.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return detail::mix64(state_);
  }

  /// Uniform double in [0, 1), 53 significant bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  void fill_unit_point(std::span<double> out) {
    for (double& x : out) x = next_double();
  }

 private:
  std::uint64_t state_;
};

/// Splitting rule: fold each word through the splitmix64 finalizer,
///XOR-chaining into the running state. Distinct tuples give independent
/// streams; used for (estimator, budget, replication) and, inside one
/// estimate, for (phase, stratum) so one stratum's draws do not depend
/// on the allocation chosen for the others.
inline std::uint64_t derive_stream(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t w : words) h = detail::mix64(h ^ detail::mix64(w));
  return h;
}

/// Engine for one (phase, stratum) sub-stream of a run.
inline SplitMix64 substream(RngSpec rng, std::uint64_t phase, std::uint64_t stratum) {
  return SplitMix64(derive_stream({rng.seed, rng.stream, phase, stratum}));
}

}  // namespace stratmc
