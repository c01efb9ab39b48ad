#include "rng.hpp"

#include <cmath>
#include <numbers>

namespace batchgfn {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t index) {
  uint64_t z = splitmix64(seed ^ fnv1a(tag));
  return splitmix64(z ^ (index * 0x9E3779B97F4A7C15ULL + 1));
}

uint64_t Rng::uniform_below(uint64_t n) {
  // Map [0, bucket*n) onto [0, n); each value has exactly `bucket` preimages.
  const uint64_t bucket = UINT64_MAX / n;
  const uint64_t limit = bucket * n;
  uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r / bucket;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so log is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace batchgfn
