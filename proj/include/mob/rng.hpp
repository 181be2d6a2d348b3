#ifndef MOB_RNG_HPP
#define MOB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mob::nd {

// Repo-wide deterministic generator: SplitMix64 (Steele, Lea & Flood 2014).
// One 64-bit word of state; identical seed gives an identical stream on every
// platform. Normal draws use the plain (non-caching) Box-Muller transform so
// the generator state is a single word and checkpoints stay trivial.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  // Independent substream: mixes the parent seed with a stream id. Used to
  // give each task / trajectory / member its own generator regardless of
  // draw order elsewhere.
  static Rng from(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
    r.next_u64();
    return r;
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1): top 53 bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; u1 is shifted into (0, 1] so log is finite.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace mob::nd

#endif
