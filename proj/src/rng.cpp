// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/rng.hpp"

#include <cmath>

namespace cvda {

uint64_t splitmix64(uint64_t& state) {
  // Steele, Lea, Flood (2014). Fully specified, so output is portable.
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

// FNV-1a, used only to fold stream names into seeds.
uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

uint64_t derive_stream(uint64_t seed, std::string_view name) {
  uint64_t st = seed ^ fnv1a(name);
  // A couple of mixing rounds so that nearby seeds with the same name do not
  // produce correlated stream states.
  splitmix64(st);
  splitmix64(st);
  return st;
}

uint64_t derive_stream(uint64_t seed, std::string_view name, uint64_t index) {
  uint64_t st = derive_stream(seed, name) ^ (0x9e3779b97f4a7c15ull * (index + 1));
  splitmix64(st);
  return st;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

uint64_t Rng::index(uint64_t n) {
  // Reject the tail of the 64-bit range that does not divide evenly by n.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] uniforms; u1 must stay away from zero for the log.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

double Rng::truncated_normal(double sigma) {
  for (;;) {
    double x = normal();
    if (std::fabs(x) <= 2.0) return x * sigma;
  }
}

}  // namespace cvda
