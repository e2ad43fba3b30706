#include <gtest/gtest.h>

#include <random>

#include "lirlab/exponents.hpp"

using namespace lirlab;

namespace {

// Plain fraction with its own normalization, used as an oracle against boost::rational.
struct Frac {
  long long p, q;
};

long long gcd_ll(long long a, long long b)
{
  a = a < 0 ? -a : a;
  b = b < 0 ? -b : b;
  while (b) {
    long long t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Frac norm(long long p, long long q)
{
  if (q < 0) p = -p, q = -q;
  long long g = gcd_ll(p, q);
  return {p / g, q / g};
}

// 1/t_j = 1/2 - j m / n  ->  t_j = 2n / (n - 2jm) when positive
Frac oracle_chain(int n, int m, int j, bool& infinite)
{
  long long den = n - 2LL * j * m;
  infinite = den <= 0;
  return infinite ? Frac{0, 1} : norm(2LL * n, den);
}

bool same(const Rational& r, const Frac& f) { return r.numerator() == f.p && r.denominator() == f.q; }

}  // namespace

TEST(SobolevExponent, WorkedExamples)
{
  EXPECT_EQ(sobolev_exponent(Rational(3, 2), 1, 2).value, Rational(6));
  EXPECT_EQ(sobolev_exponent(Rational(2), 1, 3).value, Rational(6));
  EXPECT_TRUE(sobolev_exponent(Rational(2), 2, 3).infinite);
  EXPECT_TRUE(sobolev_exponent(Rational(2), 1, 2).infinite);
}

TEST(SobolevExponent, RejectsBadInput)
{
  EXPECT_THROW(sobolev_exponent(Rational(0), 1, 2), Error);
  EXPECT_THROW(sobolev_exponent(Rational(2), 1, 0), Error);
  EXPECT_THROW(sobolev_exponent(ExtendedExponent::inf(), 1, 3), Error);
}

TEST(ExponentChain, DiracOnThreeTorus)
{
  auto ch = exponent_chain(3, 1, Rational(4));
  ASSERT_EQ(ch.t.size(), 3u);
  EXPECT_EQ(ch.t[0].value, Rational(2));
  EXPECT_EQ(ch.t[1].value, Rational(6));
  EXPECT_TRUE(ch.t[2].infinite);
  EXPECT_EQ(ch.l, 1);
}

TEST(ExponentChain, LaplacianOnLine)
{
  auto ch = exponent_chain(1, 2, Rational(4));
  ASSERT_EQ(ch.t.size(), 2u);
  EXPECT_TRUE(ch.t[1].infinite);
  EXPECT_EQ(ch.l, 1);
}

TEST(ExponentChain, BelowTwoIsExhausted)
{
  try {
    exponent_chain(3, 1, Rational(3, 2));
    FAIL() << "expected ChainExhausted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChainExhausted);
  }
}

TEST(ExponentChain, BoundaryValueSelectsUpperInterval)
{
  // r = t_1 exactly: t_1 <= r < t_2
  auto ch = exponent_chain(8, 1, Rational(8, 3));
  EXPECT_EQ(ch.t[1].value, Rational(8, 3));
  EXPECT_EQ(ch.l, 2);
}

TEST(StepBound, WorkedValues)
{
  EXPECT_EQ(step_bound(Rational(4), Rational(2), Rational(1, 3)), 2);
  EXPECT_EQ(step_bound(Rational(2), Rational(2), Rational(1, 3)), 1);
  EXPECT_EQ(simulate_steps(Rational(4), Rational(2), Rational(1, 3)), 1);
  EXPECT_THROW(step_bound(Rational(1), Rational(2), Rational(1, 3)), Error);
  EXPECT_THROW(step_bound(Rational(4), Rational(2), Rational(0)), Error);
}

TEST(Interpolation, WorkedValues)
{
  // n = 8, m = 1: t_1 = 8/3, t_2 = 4
  auto e = interpolation_exponents(8, 1, 2, 1);
  EXPECT_EQ(e.theta, Rational(1, 2));
  EXPECT_EQ(e.t_j.value, Rational(8, 3));
  EXPECT_EQ(e.alpha, Rational(3, 2) * Rational(8, 3));
  EXPECT_EQ(e.beta, Rational(2) * Rational(8, 3));
  EXPECT_LE(e.alpha, e.beta);
  try {
    interpolation_exponents(3, 1, 2, 1);
    FAIL() << "expected InfiniteExponent";
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::InfiniteExponent);
  }
}

TEST(Weights, TableForDiracOnThreeTorus)
{
  WeightParams p{3, 1, Rational(4), 1, 1};
  // w_l = l m t_{l-1}, v_r = (r/t_l - 1) + (l+2) m r, v_r(ball) = (1/t_l - 1/r) + (l+1) m, w_j = (l+1-j) m
  EXPECT_EQ(make_weight(WeightKind::w_l, p).exponent, Rational(2));
  EXPECT_EQ(make_weight(WeightKind::v_r, p).exponent, Rational(4, 6) - 1 + 12);
  EXPECT_EQ(make_weight(WeightKind::v_r_prime, p).exponent, make_weight(WeightKind::v_r, p).exponent);
  EXPECT_EQ(make_weight(WeightKind::v_r_ball, p).exponent, Rational(1, 6) - Rational(1, 4) + 2);
  EXPECT_EQ(make_weight(WeightKind::w_j, p).exponent, Rational(1));
}

TEST(Weights, ValuesArePowersOfRadius)
{
  auto w = weight_values(Rational(3, 2), {1.0, 0.25, 0.5});
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 0.125);
  EXPECT_NEAR(w[2], std::pow(0.5, 1.5), 1e-15);
  auto z = weight_values(Rational(0), {0.3});
  EXPECT_DOUBLE_EQ(z[0], 1.0);
}

TEST(ExponentProperties, RandomCasesAgainstFractionOracle)
{
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> N(1, 12), M(1, 3), P(2, 40), Q(1, 6);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = N(rng), m = M(rng);
    Rational r(P(rng), Q(rng));
    if (r < Rational(2)) r += Rational(2);
    auto ch = exponent_chain(n, m, r);
    for (std::size_t j = 0; j < ch.t.size(); ++j) {
      bool inf = false;
      Frac f = oracle_chain(n, m, static_cast<int>(j), inf);
      ASSERT_EQ(ch.t[j].infinite, inf);
      if (!inf) {
        ASSERT_TRUE(same(ch.t[j].value, f)) << n << " " << m << " " << j;
      }
    }
    // l-selection against linear search over the oracle chain
    int l = -1;
    for (int j = 1;; ++j) {
      bool inf1 = false, inf0 = false;
      Frac lo = oracle_chain(n, m, j - 1, inf0);
      Frac hi = oracle_chain(n, m, j, inf1);
      const bool ge_lo = r.numerator() * lo.q >= lo.p * r.denominator();
      const bool lt_hi = inf1 || r.numerator() * hi.q < hi.p * r.denominator();
      if (ge_lo && lt_hi) {
        l = j;
        break;
      }
    }
    ASSERT_EQ(ch.l, l);
    // step bound: floor(1 + (r - 2) n / (4 m)) and the simulated chain never exceeds it
    const Rational tau(m, n);
    const Rational b = Rational(1) + (r - Rational(2)) * Rational(n, 4 * m);
    ASSERT_EQ(step_bound(r, Rational(2), tau), static_cast<int>(b.numerator() / b.denominator()));
    ASSERT_LE(simulate_steps(r, Rational(2), tau), step_bound(r, Rational(2), tau));
    // interpolation exponents whenever some t_k is finite
    int kmax = 0;
    while (!ch.at(kmax + 1).infinite) ++kmax;
    if (kmax >= 1) {
      std::uniform_int_distribution<int> K(1, kmax);
      const int k = K(rng);
      std::uniform_int_distribution<int> J(1, k);
      const int j = J(rng);
      auto e = interpolation_exponents(n, m, k, j);
      ASSERT_EQ(e.theta, Rational(j, k));
      ASSERT_LE(e.alpha, e.beta);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(ExponentProperties, ChainIsIncreasing)
{
  for (int n = 1; n <= 10; ++n)
    for (int m = 1; m <= 3; ++m) {
      auto ch = exponent_chain(n, m, Rational(2));
      for (std::size_t j = 1; j < ch.t.size(); ++j) EXPECT_TRUE(ch.t[j - 1] < ch.t[j]);
      EXPECT_TRUE(ch.t.back().infinite);
    }
}
