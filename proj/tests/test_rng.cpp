// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cvda/rng.hpp"

using namespace cvda;

TEST_CASE("splitmix64 matches published reference outputs") {
  // First three outputs for seed 1234567, from the reference implementation.
  uint64_t s = 1234567;
  CHECK(splitmix64(s) == 6457827717110365317ull);
  CHECK(splitmix64(s) == 3203168211198807973ull);
  CHECK(splitmix64(s) == 9817491932198370423ull);
}

TEST_CASE("same seed gives identical streams, different names decorrelate") {
  Rng a(derive_stream(42, "data"));
  Rng b(derive_stream(42, "data"));
  Rng c(derive_stream(42, "init"));
  bool all_equal = true;
  bool any_equal_cross = false;
  for (int i = 0; i < 64; ++i) {
    uint64_t xa = a.next_u64(), xb = b.next_u64(), xc = c.next_u64();
    all_equal = all_equal && (xa == xb);
    any_equal_cross = any_equal_cross || (xa == xc);
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_cross);
}

TEST_CASE("indexed substreams differ per index") {
  CHECK(derive_stream(7, "data", 0) != derive_stream(7, "data", 1));
  CHECK(derive_stream(7, "data", 0) == derive_stream(7, "data", 0));
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
  Rng r(99);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("index is in range and hits every residue") {
  Rng r(5);
  std::set<uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    uint64_t k = r.index(7);
    CHECK(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("normal has roughly standard moments") {
  Rng r(2024);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("truncated_normal respects the two-sigma bound") {
  Rng r(11);
  for (int i = 0; i < 5000; ++i) {
    CHECK(std::fabs(r.truncated_normal(0.02)) <= 0.04 + 1e-12);
  }
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;

  Rng r1(77), r2(77), r3(78);
  std::vector<int> a = v, b = v, c = v;
  r1.shuffle(a);
  r2.shuffle(b);
  r3.shuffle(c);
  CHECK(a == b);
  CHECK(a != c);  // astronomically unlikely to collide

  std::sort(a.begin(), a.end());
  CHECK(a == w);
}
