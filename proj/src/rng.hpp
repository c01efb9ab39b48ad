#pragma once

#include <cstdint>
#include <string_view>
#include <random>

namespace batchgfn {

// Seed derivation for named substreams: splitmix64 over the parent seed
// mixed with an FNV-1a hash of the tag and an index. Children of distinct
// tags (or indices) are decorrelated; the same (seed, tag, index) always
// yields the same child.
uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t index = 0);

// Deterministic, platform-independent randomness.
//
// std::mt19937_64 has a sequence fixed by the standard, so we keep it as the
// engine but avoid std::*_distribution (whose outputs are implementation
// defined). Uniform doubles take the top 53 bits; normals use Box-Muller
// with a cached spare.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n >= 1. Unbiased via rejection.
  uint64_t uniform_below(uint64_t n);

  // Standard normal draw.
  double normal();

  // Child stream; does not advance this stream's state.
  Rng split(std::string_view tag, uint64_t index = 0) const {
    return Rng(mix_seed(seed_, tag, index));
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace batchgfn
