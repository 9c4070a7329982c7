#include <doctest.h>

#include <cmath>
#include <vector>

#include "didp/rng.hpp"

using didp::rng::Stream;
using didp::rng::substream;

TEST_CASE("substreams are deterministic and key-separated") {
  Stream a = substream(42, 7);
  Stream b = substream(42, 7);
  Stream c = substream(42, 8);
  bool identical = true, distinct = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    identical = identical && (va == b.next_u64());
    distinct = distinct || (va != c.next_u64());
  }
  CHECK(identical);
  CHECK(distinct);
}

TEST_CASE("uniform01 stays in [0,1) and has the right mean") {
  Stream s = substream(1, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // se of the mean is ~0.00065; allow 5 sigma
  CHECK(std::fabs(sum / n - 0.5) < 0.0033);
}

TEST_CASE("bernoulli(1) and bernoulli(0) are exact") {
  Stream s = substream(3, 0);
  for (int i = 0; i < 1000; ++i) {
    CHECK(s.bernoulli(1.0));
    CHECK(!s.bernoulli(0.0));
  }
}

TEST_CASE("poisson moments match across both sampler regimes") {
  // lambda below and above the Knuth/PTRS cutoff at 10
  for (double lambda : {0.7, 4.0, 9.9, 10.1, 15.0, 120.0}) {
    Stream s = substream(17, static_cast<std::uint64_t>(lambda * 100));
    const int n = 400000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(s.poisson(lambda));
      sum += x;
      sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double mean_se = std::sqrt(lambda / n);
    CHECK(std::fabs(mean - lambda) < 5.0 * mean_se);
    // var(X) = lambda; the sample variance of a Poisson has variance
    // ~ (lambda + 2 lambda^2)/n
    const double var_se = std::sqrt((lambda + 2.0 * lambda * lambda) / n);
    CHECK(std::fabs(var - lambda) < 5.0 * var_se);
  }
}

TEST_CASE("poisson(0) is identically zero") {
  Stream s = substream(5, 0);
  for (int i = 0; i < 100; ++i) CHECK(s.poisson(0.0) == 0);
}

TEST_CASE("normal moments") {
  Stream s = substream(23, 0);
  const int n = 400000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal(3.0, 2.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean - 3.0) < 5.0 * 2.0 / std::sqrt(n));
  CHECK(std::fabs(var - 4.0) < 5.0 * 4.0 * std::sqrt(2.0 / n));
}
