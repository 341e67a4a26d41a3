#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "crossres/rng.hpp"

using crossres::Rng;

TEST_CASE("same seed and stream reproduce the sequence") {
  Rng a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams decorrelate") {
  Rng a(42, 0), b(42, 1);
  int equal = 0;
  for (int i = 0; i < 1000; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}

TEST_CASE("uniform stays in [0,1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform_int respects inclusive bounds and hits them") {
  Rng rng(11);
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) {
    const int v = rng.uniform_int(-2, 4);
    CHECK(v >= -2);
    CHECK(v <= 4);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(rng.uniform_int(3, 2), std::invalid_argument);
}

TEST_CASE("uniform_int is uniform by chi-square over 6 bins") {
  // df = 5, critical value at p = 0.01 is 15.086.
  Rng rng(123);
  const int draws = 10000;
  std::array<long, 6> counts{};
  for (int i = 0; i < draws; ++i) ++counts[rng.uniform_int(0, 5)];
  const double expected = draws / 6.0;
  double chi2 = 0.0;
  for (const long c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 15.086);
}

TEST_CASE("normal has roughly zero mean and unit variance") {
  Rng rng(5);
  const int n = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("state round trip replays the stream") {
  Rng rng(99, 4);
  rng.next_u64();
  rng.normal();
  const auto saved = rng.save_state();
  std::vector<std::uint64_t> expected;
  for (int i = 0; i < 100; ++i) expected.push_back(rng.next_u64());

  Rng other(0);
  other.load_state(saved);
  for (int i = 0; i < 100; ++i) CHECK(other.next_u64() == expected[i]);
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng a(3), b(3);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> identity(50);
  std::iota(identity.begin(), identity.end(), 0);
  CHECK(sorted == identity);
  CHECK(v != identity);  // 50! chance of a fixed point ordering is negligible
}
