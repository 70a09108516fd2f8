// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cvda {

// Deterministic random number generation.
//
// Every source of randomness in the pipeline is a named substream derived
// from the single user-facing seed. Substreams are independent SplitMix64
// generators; the derivation hashes the stream name into the seed so that
// e.g. the batching order can change without disturbing parameter init.
//
// We deliberately avoid std::shuffle and the std <random> distributions:
// their outputs are implementation-defined, and run artifacts (corpora,
// checkpoints, metrics) must be byte-identical across standard libraries.

// Core SplitMix64 step: advances the state and returns the next output.
uint64_t splitmix64(uint64_t& state);

// Derives the seed of a named substream from a root seed. Same (seed, name)
// always yields the same stream; distinct names decorrelate.
uint64_t derive_stream(uint64_t seed, std::string_view name);

// Convenience for per-item streams such as (seed, "data", clip_index).
uint64_t derive_stream(uint64_t seed, std::string_view name, uint64_t index);

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();

  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
  uint64_t index(uint64_t n);

  // Standard normal via Box-Muller. One spare value is cached, so draws
  // come in deterministic pairs.
  double normal();

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Normal truncated to [-2*sigma, 2*sigma], the usual init for transformer
  // weights. Rejection sampling on top of normal().
  double truncated_normal(double sigma);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (uint64_t i = v.size() - 1; i >= 1; --i) {
      uint64_t j = index(i + 1);
      using std::swap;
      swap(v[i], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cvda
