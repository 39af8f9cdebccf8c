#include "doctest.h"

#include <cmath>
#include <vector>

#include "feater/errors.hpp"
#include "feater/rng.hpp"

using namespace feater;

TEST_CASE("identical seed gives identical draw sequence") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.counter() == 100);
}

TEST_CASE("different seeds and labels give different sequences") {
  RngStream a(1), b(2);
  CHECK(a.next_u64() != b.next_u64());

  RngStream base(7);
  RngStream s1 = base.substream("mask");
  RngStream s2 = base.substream("init");
  CHECK(s1.next_u64() != s2.next_u64());

  // Substreams are insensitive to draws on the parent.
  RngStream p1(9), p2(9);
  p1.next_u64();
  CHECK(p1.substream("x").next_u64() == p2.substream("x").next_u64());
}

TEST_CASE("uniform draws stay in range and look flat") {
  RngStream rng(3);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.next_uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    sum += v;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("normal draws have the right moments") {
  RngStream rng(5);
  const int n = 40000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.next_normal();
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("bounded draws are unbiased and in range") {
  RngStream rng(13);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 21000; ++i) ++counts[rng.next_below(7)];
  for (int c : counts) {
    CHECK(c > 2700);
    CHECK(c < 3300);
  }
  CHECK_THROWS_AS(rng.next_below(0), ParameterError);
}
