#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace psiproc {

// Seeded 64-bit stream. Replica r of a run with seed s uses the stream
// seeded by s ^ r; `substream` separates independent uses inside a replica
// (e.g. the Poisson clock) so enabling one does not perturb another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint32_t substream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      substream};
    engine_.seed(seq);
  }

  static Rng for_replica(std::uint64_t seed, std::uint64_t replica, std::uint32_t substream = 0) {
    return Rng(seed ^ replica, substream);
  }

  std::uint64_t bits() { return engine_(); }

  // Uniform on the open interval (0,1), 53-bit resolution.
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  double exponential() { return -std::log(uniform()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace psiproc
