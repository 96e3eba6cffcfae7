#pragma once

#include <cmath>
#include <cstdint>

// Counter-free keyed random streams. Every consumer derives its own stream
// from (seed, purpose, a, b), so channel slots, user drops and shadowing
// samples are reproducible in isolation and independent of evaluation order.

namespace cransim {

enum class RngPurpose : std::uint64_t {
  layout = 1,
  shadowing = 2,
  fading = 3,
  generic = 4,
};

namespace rng_detail {

inline std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t purpose,
                             std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s ^= purpose * 0xff51afd7ed558ccdULL;
  h ^= splitmix64(s);
  s ^= a * 0xc4ceb9fe1a85ec53ULL + 0x165667b19e3779f9ULL;
  h ^= splitmix64(s);
  s ^= b + 0x27d4eb2f165667c5ULL;
  h ^= splitmix64(s);
  return h;
}

}  // namespace rng_detail

class Rng {
 public:
  Rng(std::uint64_t seed, RngPurpose purpose, std::uint64_t a = 0,
      std::uint64_t b = 0)
      : state_(rng_detail::mix_key(seed, static_cast<std::uint64_t>(purpose), a, b)) {}

  std::uint64_t next_u64() { return rng_detail::splitmix64(state_); }

  // uniform in (0, 1]
  double uniform01() {
    return (next_u64() >> 11) * (1.0 / 9007199254740992.0) + 1.1102230246251565e-16;
  }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * ((next_u64() >> 11) * (1.0 / 9007199254740992.0));
  }

  // standard normal, Box-Muller with one cached value
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cransim
