#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ekdc/rng.hpp"

using ekdc::Rng;

TEST_CASE("splitmix64 reproduces the reference first output") {
  uint64_t s = 0;
  CHECK(ekdc::splitmix64(s) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("same seed gives identical streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("named streams decorrelate") {
  Rng a(123, "alpha"), b(123, "beta");
  int same = 0;
  for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
  CHECK(same == 0);
}

TEST_CASE("uniform stays in range") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform(-2.5, 1.5);
    CHECK(u >= -2.5);
    CHECK(u < 1.5);
  }
  for (int i = 0; i < 1000; ++i) {
    int64_t k = r.uniform_int(13);
    CHECK(k >= 0);
    CHECK(k < 13);
  }
}

TEST_CASE("gauss has roughly standard moments") {
  Rng r(11);
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = r.gauss();
    m1 += g;
    m2 += g * g;
  }
  m1 /= n;
  m2 /= n;
  CHECK(std::fabs(m1) < 0.02);
  CHECK(std::fabs(m2 - 1.0) < 0.02);
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng a(99), b(99);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  // and it actually moved something
  bool moved = false;
  for (int i = 0; i < 50; ++i) moved = moved || (v[i] != i);
  CHECK(moved);
}

TEST_CASE("state round-trips") {
  Rng a(5);
  a.next_u64();
  uint64_t snap = a.state();
  std::vector<uint64_t> expect;
  for (int i = 0; i < 8; ++i) expect.push_back(a.next_u64());
  a.set_state(snap);
  for (int i = 0; i < 8; ++i) CHECK(a.next_u64() == expect[i]);
}
