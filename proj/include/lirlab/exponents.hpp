#pragma once

#include <boost/rational.hpp>

#include <optional>
#include <sstream>

#include "lirlab/common.hpp"

namespace lirlab {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& q) { return boost::rational_cast<double>(q); }

inline std::string to_string(const Rational& q)
{
  std::ostringstream os;
  if (q.denominator() == 1)
    os << q.numerator();
  else
    os << q.numerator() << '/' << q.denominator();
  return os.str();
}

// Positive rational or the +inf marker.
struct ExtendedExponent {
  bool infinite = false;
  Rational value{0};

  static ExtendedExponent inf() { return {true, Rational(0)}; }
  static ExtendedExponent finite(Rational v) { return {false, v}; }

  double as_double() const { return infinite ? INFINITY : to_double(value); }
  // 1/t with 1/inf = 0
  Rational reciprocal() const { return infinite ? Rational(0) : Rational(1) / value; }

  std::string str() const { return infinite ? std::string("inf") : to_string(value); }

  bool operator==(const ExtendedExponent& o) const
  {
    return infinite == o.infinite && (infinite || value == o.value);
  }
  bool operator!=(const ExtendedExponent& o) const { return !(*this == o); }
};

inline bool operator<(const ExtendedExponent& a, const ExtendedExponent& b)
{
  if (a.infinite) return false;
  if (b.infinite) return true;
  return a.value < b.value;
}
inline bool operator<=(const ExtendedExponent& a, const ExtendedExponent& b) { return !(b < a); }

// S_k(r): 1/S = 1/r - k/n, +inf when the right side is <= 0.
inline ExtendedExponent sobolev_exponent(const ExtendedExponent& r, int k, int n)
{
  if (r.infinite || r.value <= 0 || k < 0 || n < 1)
    throw Error(ErrorCode::InvalidModel, "sobolev_exponent needs finite r > 0, k >= 0, n >= 1");
  Rational inv = Rational(1) / r.value - Rational(k, n);
  if (inv <= 0) return ExtendedExponent::inf();
  return ExtendedExponent::finite(Rational(1) / inv);
}

inline ExtendedExponent sobolev_exponent(const Rational& r, int k, int n)
{
  return sobolev_exponent(ExtendedExponent::finite(r), k, n);
}

struct ExponentChain {
  int n = 0, m = 0;
  Rational r;
  std::vector<ExtendedExponent> t;  // t_0 = 2, ..., last entry is the first +inf
  int l = 0;                        // t_{l-1} <= r < t_l

  ExtendedExponent at(int j) const
  {
    if (j < static_cast<int>(t.size())) return t[j];
    return ExtendedExponent::inf();
  }
};

// t_j = S_{jm}(2), i.e. 1/t_j = 1/2 - jm/n.
inline ExtendedExponent chain_exponent(int n, int m, int j) { return sobolev_exponent(Rational(2), j * m, n); }

inline ExponentChain exponent_chain(int n, int m, const Rational& r)
{
  if (n < 1 || m < 1) throw Error(ErrorCode::InvalidModel, "exponent_chain needs n >= 1, m >= 1");
  ExponentChain ch;
  ch.n = n;
  ch.m = m;
  ch.r = r;
  for (int j = 0;; ++j) {
    ch.t.push_back(chain_exponent(n, m, j));
    if (ch.t.back().infinite) break;
  }
  const auto R = ExtendedExponent::finite(r);
  if (r < 2) throw Error(ErrorCode::ChainExhausted, "r = " + to_string(r) + " is below t_0 = 2");
  for (int l = 1; l < static_cast<int>(ch.t.size()); ++l) {
    if (ch.t[l - 1] <= R && R < ch.t[l]) {
      ch.l = l;
      return ch;
    }
  }
  throw Error(ErrorCode::ChainExhausted, "no l with t_{l-1} <= r < t_l");
}

// Number of regularity steps allowed: the largest integer k with k <= 1 + (1/tau)(r-s)/(2s).
inline int step_bound(const Rational& r, const Rational& s, const Rational& tau)
{
  if (!(r >= s) || !(s > 1) || !(tau > 0))
    throw Error(ErrorCode::InvalidModel, "step_bound needs r >= s > 1 and tau > 0");
  Rational b = Rational(1) + (r - s) / (Rational(2) * s * tau);
  std::int64_t q = b.numerator() / b.denominator();
  if (b.numerator() < 0 && q * b.denominator() != b.numerator()) --q;
  return static_cast<int>(q);
}

// Steps of the chain 1/t_k = 1/s - k tau until t_k >= r (t_k = inf once 1/t_k <= 0).
inline int simulate_steps(const Rational& r, const Rational& s, const Rational& tau)
{
  int k = 0;
  Rational inv = Rational(1) / s;
  const Rational target = Rational(1) / r;
  while (inv > target) {
    inv -= tau;
    ++k;
    if (inv <= 0) break;
  }
  return k;
}

struct InterpolationExponents {
  Rational theta, alpha, beta;
  ExtendedExponent t_j, t_k;
};

inline InterpolationExponents interpolation_exponents(int n, int m, int k, int j)
{
  if (j < 1 || j > k) throw Error(ErrorCode::InvalidModel, "interpolation_exponents needs 1 <= j <= k");
  InterpolationExponents e;
  e.t_j = chain_exponent(n, m, j);
  e.t_k = chain_exponent(n, m, k);
  if (e.t_j.infinite || e.t_k.infinite)
    throw Error(ErrorCode::InfiniteExponent, "t_j or t_k is infinite for n=" + std::to_string(n) +
                                                 " m=" + std::to_string(m) + " k=" + std::to_string(k));
  e.theta = Rational(j, k);
  e.alpha = Rational(k + 1, k) * Rational(m * j) * e.t_j.value;
  e.beta = Rational((j + 1) * m) * e.t_j.value;
  if (e.alpha > e.beta) throw Error(ErrorCode::InvalidModel, "alpha_j > beta_j");
  return e;
}

enum class WeightKind { w_l, v_r, v_r_prime, v_r_ball, w_j, alpha_j, beta_j };

inline const char* weight_name(WeightKind k)
{
  switch (k) {
    case WeightKind::w_l: return "w_l";
    case WeightKind::v_r: return "v_r";
    case WeightKind::v_r_prime: return "v'_r";
    case WeightKind::v_r_ball: return "v_r(ball)";
    case WeightKind::w_j: return "w_j";
    case WeightKind::alpha_j: return "alpha_j";
    case WeightKind::beta_j: return "beta_j";
  }
  return "?";
}

// A weight R(x)^exponent together with the norm it multiplies.
struct WeightSpec {
  WeightKind kind;
  Rational exponent;
  std::string norm;    // "L^r", "W^{m,r}", "L^{t_{l-j}}", ...
  std::string serves;  // which estimate uses it
};

struct WeightParams {
  int n = 0, m = 0;
  Rational r{2};
  int j = 1;  // w_j, alpha_j, beta_j
  int k = 1;  // alpha_j, beta_j
};

inline WeightSpec make_weight(WeightKind kind, const WeightParams& p)
{
  WeightSpec w{kind, Rational(0), "", ""};
  switch (kind) {
    case WeightKind::w_l: {
      auto ch = exponent_chain(p.n, p.m, p.r);
      auto tl1 = ch.at(ch.l - 1);
      if (tl1.infinite) throw Error(ErrorCode::InfiniteExponent, "t_{l-1} infinite");
      w.exponent = Rational(ch.l * p.m) * tl1.value;
      w.norm = "L^{t_{l-1}}";
      w.serves = "global L^r estimate, also w'_1 of the global W^{m,r} estimate";
      break;
    }
    case WeightKind::v_r:
    case WeightKind::v_r_prime: {
      auto ch = exponent_chain(p.n, p.m, p.r);
      Rational rt = p.r * ch.at(ch.l).reciprocal();
      w.exponent = (rt - 1) + Rational((ch.l + 2) * p.m) * p.r;
      w.norm = kind == WeightKind::v_r ? "L^r" : "W^{m,r}";
      w.serves = kind == WeightKind::v_r ? "global L^r estimate" : "global W^{m,r} estimate";
      break;
    }
    case WeightKind::v_r_ball: {
      auto ch = exponent_chain(p.n, p.m, p.r);
      w.exponent = (ch.at(ch.l).reciprocal() - Rational(1) / p.r) + Rational((ch.l + 1) * p.m);
      w.norm = "L^r (raised to r)";
      w.serves = "per-ball estimate and the weighted L^r estimate";
      break;
    }
    case WeightKind::w_j: {
      auto ch = exponent_chain(p.n, p.m, p.r);
      w.exponent = Rational((ch.l + 1 - p.j) * p.m);
      w.norm = "L^{t_{l-j}} (raised to t_{l-j})";
      w.serves = "weighted L^r estimate";
      break;
    }
    case WeightKind::alpha_j:
    case WeightKind::beta_j: {
      auto e = interpolation_exponents(p.n, p.m, p.k, p.j);
      w.exponent = kind == WeightKind::alpha_j ? e.alpha : e.beta;
      w.norm = "L^{t_j}";
      w.serves = "interpolation inequality";
      break;
    }
  }
  return w;
}

// Pointwise R(x)^exponent.
inline std::vector<double> weight_values(const Rational& exponent, const std::vector<double>& radius)
{
  std::vector<double> w(radius.size());
  const double e = to_double(exponent);
  for (std::size_t i = 0; i < radius.size(); ++i) w[i] = e == 0.0 ? 1.0 : std::pow(radius[i], e);
  return w;
}

}  // namespace lirlab
