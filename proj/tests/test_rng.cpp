#include "tlab/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

using tlab::Rng;

// ===== Determinism ==========================================================

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.next_u64(), b.next_u64());
  }
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) {
    if (a.next_u64() != b.next_u64()) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, GaussianStreamDeterministic) {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_DOUBLE_EQ(a.gaussian(), b.gaussian());
  }
}

// ===== Substreams ===========================================================

TEST(Rng, SubstreamsAreIndependentOfParentConsumption) {
  // substream(id) is keyed on the original seed, so deriving it before or
  // after the parent consumed draws must give the same stream.
  Rng fresh(99);
  Rng used(99);
  for (int i = 0; i < 57; ++i) used.next_u64();
  Rng s1 = fresh.substream(3);
  Rng s2 = used.substream(3);
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(s1.next_u64(), s2.next_u64());
  }
}

TEST(Rng, DistinctSubstreamIdsProduceDistinctStreams) {
  Rng master(2024);
  Rng a = master.substream(1);
  Rng b = master.substream(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++same;
  }
  EXPECT_EQ(same, 0);
}

TEST(Rng, SubstreamDiffersFromParent) {
  Rng master(77);
  Rng sub = master.substream(0);
  Rng parent(77);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    if (sub.next_u64() == parent.next_u64()) ++same;
  }
  EXPECT_EQ(same, 0);
}

// ===== Distributional sanity ================================================

TEST(Rng, Uniform01InHalfOpenUnitInterval) {
  Rng g(5);
  for (int i = 0; i < 100000; ++i) {
    const double u = g.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, UniformMeanAndVariance) {
  Rng g(6);
  const long n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double u = g.uniform01();
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  // Standard error of the mean is 1/sqrt(12 n) ~ 2.9e-4; allow 5 sigma.
  EXPECT_NEAR(mean, 0.5, 5.0 / std::sqrt(12.0 * n));
  EXPECT_NEAR(var, 1.0 / 12.0, 0.001);
}

TEST(Rng, GaussianMoments) {
  Rng g(8);
  const long n = 2000000;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double z = g.gaussian();
    s1 += z;
    s2 += z * z;
    s3 += z * z * z;
    s4 += z * z * z * z;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  const double skew = s3 / n;       // third raw moment ~ 0
  const double kurt = s4 / n;       // fourth raw moment ~ 3
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(var, 1.0, 5.0 * std::sqrt(2.0 / static_cast<double>(n)));
  EXPECT_NEAR(skew, 0.0, 0.02);
  EXPECT_NEAR(kurt, 3.0, 0.05);
}

TEST(Rng, GaussianPairsAreUncorrelated) {
  // Box–Muller emits draws in pairs; the cached spare must not correlate
  // consecutive outputs.
  Rng g(11);
  const long n = 1000000;
  double prev = g.gaussian();
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    const double z = g.gaussian();
    acc += prev * z;
    prev = z;
  }
  EXPECT_NEAR(acc / n, 0.0, 5.0 / std::sqrt(static_cast<double>(n)));
}
