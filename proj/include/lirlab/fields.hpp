#pragma once

#include <fstream>
#include <functional>
#include <sstream>

#include "lirlab/fft.hpp"
#include "lirlab/geometry.hpp"

namespace lirlab {

// C^N-valued section on a chart grid, node-major: values[node*rank + c].
struct GridSection {
  Grid grid;
  int rank = 1;
  std::vector<cplx> values;

  GridSection() = default;
  GridSection(Grid g, int r) : grid(std::move(g)), rank(r), values(grid.size() * r, cplx(0.0)) {}

  std::size_t nodes() const { return grid.size(); }
  cplx& at(std::size_t node, int c) { return values[node * rank + c]; }
  const cplx& at(std::size_t node, int c) const { return values[node * rank + c]; }

  double modulus(std::size_t node) const
  {
    double s = 0.0;
    for (int c = 0; c < rank; ++c) s += std::norm(values[node * rank + c]);
    return std::sqrt(s);
  }

  GridSection& operator+=(const GridSection& o)
  {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }
  GridSection& operator-=(const GridSection& o)
  {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
  }
  GridSection& operator*=(cplx s)
  {
    for (auto& v : values) v *= s;
    return *this;
  }
};

inline GridSection operator+(GridSection a, const GridSection& b) { return a += b; }
inline GridSection operator-(GridSection a, const GridSection& b) { return a -= b; }
inline GridSection operator*(cplx s, GridSection a) { return a *= s; }

// Samples f(x, out) with out of length rank at every node.
inline GridSection sample_section(const Grid& grid, int rank,
                                  const std::function<void(const std::vector<double>&, cplx*)>& f)
{
  GridSection s(grid, rank);
  for (std::size_t i = 0; i < grid.size(); ++i) f(grid.coords(i), &s.values[i * rank]);
  return s;
}

inline GridSection sample_scalar(const Grid& grid, const std::function<cplx(const std::vector<double>&)>& f)
{
  return sample_section(grid, 1, [&](const std::vector<double>& x, cplx* out) { out[0] = f(x); });
}

// Seeded trigonometric polynomial: `modes` plane waves with nonzero integer
// frequencies |k_a| <= kmax (in units of 2 pi / L_a) and complex Gaussian amplitudes.
inline GridSection band_limited_section(const Grid& grid, int rank, std::uint64_t seed, int modes = 8, int kmax = 3)
{
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> K(-kmax, kmax);
  std::normal_distribution<double> G(0.0, 1.0);
  const int n = grid.dim();
  std::vector<std::vector<double>> ks;
  std::vector<std::vector<cplx>> amp;
  for (int q = 0; q < modes; ++q) {
    std::vector<int> k(n);
    bool zero = true;
    while (zero) {
      for (auto& v : k) v = K(rng);
      zero = std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
    }
    std::vector<double> kw(n);
    for (int a = 0; a < n; ++a) kw[a] = 2 * pi * k[a] / grid.lengths[a];
    ks.push_back(kw);
    std::vector<cplx> c(rank);
    for (auto& v : c) v = cplx(G(rng), G(rng));
    amp.push_back(c);
  }
  return sample_section(grid, rank, [&](const std::vector<double>& x, cplx* out) {
    for (int c = 0; c < rank; ++c) out[c] = 0.0;
    for (int q = 0; q < modes; ++q) {
      double ph = 0.0;
      for (int a = 0; a < n; ++a) ph += ks[q][a] * x[a];
      const cplx e = std::exp(cplx(0.0, ph));
      for (int c = 0; c < rank; ++c) out[c] += amp[q][c] * e;
    }
  });
}

// L^2(dv_g) inner product <a, b> = sum a conj(b) sqrt(g) dV
inline cplx inner(const GridSection& a, const GridSection& b, const MetricField& mf)
{
  cplx s(0.0);
  for (std::size_t i = 0; i < a.nodes(); ++i) {
    cplx t(0.0);
    for (int c = 0; c < a.rank; ++c) t += a.at(i, c) * std::conj(b.at(i, c));
    s += t * mf.volume_weight(i);
  }
  return s;
}

inline double l2(const GridSection& a, const MetricField& mf) { return std::sqrt(std::abs(inner(a, a, mf))); }

// ---------------------------------------------------------------- derivatives

namespace detail {

// Fornberg weights for the derivative of order `order` at z from nodes x.
inline std::vector<double> fornberg(double z, const std::vector<double>& x, int order)
{
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][order];
  return w;
}

// Finite differences along a non-periodic axis: 7-point stencils, centered
// in the interior and one-sided near the ends.
inline void fd_derivative(std::vector<cplx>& data, const Grid& grid, int rank, int axis, int order)
{
  const int n = grid.shape[axis];
  const int width = std::min(7, n);
  const double h = grid.spacing(axis);
  std::vector<std::vector<double>> W(n);
  std::vector<int> start(n);
  for (int i = 0; i < n; ++i) {
    int s = std::clamp(i - width / 2, 0, n - width);
    start[i] = s;
    std::vector<double> xs(width);
    for (int j = 0; j < width; ++j) xs[j] = (s + j - i) * h;
    W[i] = fornberg(0.0, xs, order);
  }
  const std::size_t st = grid.stride(axis);
  std::vector<cplx> out(data.size());
  const std::size_t total = grid.size();
  for (std::size_t node = 0; node < total; ++node) {
    const int i = static_cast<int>((node / st) % static_cast<std::size_t>(n));
    const std::size_t base = node - static_cast<std::size_t>(i) * st;
    for (int c = 0; c < rank; ++c) {
      cplx acc(0.0);
      for (int j = 0; j < width; ++j) acc += W[i][j] * data[(base + (start[i] + j) * st) * rank + c];
      out[node * rank + c] = acc;
    }
  }
  data.swap(out);
}

}  // namespace detail

// d^order/dx_axis^order: spectral on periodic axes, finite differences otherwise.
inline void partial_inplace(std::vector<cplx>& data, const Grid& grid, int rank, int axis, int order)
{
  if (order == 0) return;
  if (grid.periodic[axis])
    spectral_derivative(data, grid, rank, axis, order);
  else
    detail::fd_derivative(data, grid, rank, axis, order);
}

inline GridSection partial(const GridSection& u, int axis, int order = 1)
{
  GridSection d = u;
  partial_inplace(d.values, d.grid, d.rank, axis, order);
  return d;
}

// d^beta u for a multi-index of counts per axis
inline GridSection partial(const GridSection& u, const std::vector<int>& beta)
{
  GridSection d = u;
  for (int a = 0; a < static_cast<int>(beta.size()); ++a) partial_inplace(d.values, d.grid, d.rank, a, beta[a]);
  return d;
}

// Gamma[node*n^3 + k*n^2 + i*n + j] = Gamma^k_ij
struct Christoffel {
  int n = 0;
  std::vector<double> gamma;
  double at(std::size_t node, int k, int i, int j) const { return gamma[node * n * n * n + k * n * n + i * n + j]; }
};

inline Christoffel christoffel(const MetricField& mf)
{
  Christoffel ch;
  const int n = mf.n();
  ch.n = n;
  const std::size_t N = mf.grid.size();
  ch.gamma.assign(N * n * n * n, 0.0);
  if (mf.flat()) return ch;
  for (std::size_t node = 0; node < N; ++node)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l)
            s += mf.ginv_ij(node, k, l) * (mf.dgij(node, i, l, j) + mf.dgij(node, j, l, i) - mf.dgij(node, l, i, j));
          ch.gamma[node * n * n * n + k * n * n + i * n + j] = 0.5 * s;
        }
  return ch;
}

// grad[(node*rank + c)*n + p] = d_p u_c
// hess[(node*rank + c)*n*n + p*n + q] = (nabla^2 u_c)_pq
struct CovariantDerivatives {
  int n = 0, rank = 1;
  std::vector<cplx> grad, hess;
};

inline CovariantDerivatives covariant_derivatives(const GridSection& u, const MetricField& mf, int order)
{
  if (order < 1 || order > 2) throw Error(ErrorCode::InvalidModel, "covariant derivative order must be 1 or 2");
  CovariantDerivatives cd;
  const int n = mf.n(), R = u.rank;
  cd.n = n;
  cd.rank = R;
  const std::size_t N = u.nodes();
  std::vector<GridSection> d1;
  for (int p = 0; p < n; ++p) d1.push_back(partial(u, p, 1));
  cd.grad.assign(N * R * n, cplx(0.0));
  for (std::size_t i = 0; i < N; ++i)
    for (int c = 0; c < R; ++c)
      for (int p = 0; p < n; ++p) cd.grad[(i * R + c) * n + p] = d1[p].at(i, c);
  if (order == 1) return cd;
  cd.hess.assign(N * R * n * n, cplx(0.0));
  auto ch = christoffel(mf);
  for (int p = 0; p < n; ++p)
    for (int q = p; q < n; ++q) {
      GridSection dpq = p == q ? partial(u, p, 2) : partial(d1[p], q, 1);
      for (std::size_t i = 0; i < N; ++i)
        for (int c = 0; c < R; ++c) {
          cplx v = dpq.at(i, c);
          if (!ch.gamma.empty())
            for (int k = 0; k < n; ++k) v -= ch.at(i, k, p, q) * d1[k].at(i, c);
          cd.hess[(i * R + c) * n * n + p * n + q] = v;
          cd.hess[(i * R + c) * n * n + q * n + p] = v;
        }
    }
  return cd;
}

// ---------------------------------------------------------------- domains and norms

struct Domain {
  bool whole = true;
  std::vector<std::size_t> nodes;  // ascending when !whole

  static Domain all() { return {}; }
  static Domain of(std::vector<std::size_t> nodes)
  {
    std::sort(nodes.begin(), nodes.end());
    return {false, std::move(nodes)};
  }

  template <class F>
  void for_each(std::size_t total, F&& f) const
  {
    if (whole)
      for (std::size_t i = 0; i < total; ++i) f(i);
    else
      for (auto i : nodes) f(i);
  }

  std::size_t count(std::size_t total) const { return whole ? total : nodes.size(); }
};

inline Domain ball_domain(DistanceEngine& eng, std::size_t center, double radius)
{
  std::vector<std::size_t> nodes;
  for (auto [v, d] : eng.ball(center, radius)) nodes.push_back(v);
  return Domain::of(std::move(nodes));
}

inline Domain ball_domain(const MetricField& mf, std::size_t center, double radius)
{
  DistanceEngine eng(mf);
  return ball_domain(eng, center, radius);
}

inline double domain_volume(const MetricField& mf, const Domain& dom)
{
  double v = 0.0;
  dom.for_each(mf.grid.size(), [&](std::size_t i) { v += mf.volume_weight(i); });
  return v;
}

struct NormReport {
  std::string kind;
  double value = 0.0;
  std::size_t resolution = 0;
  double quadrature_error = std::nan("");
  std::vector<double> parts;  // per derivative order for Sobolev norms
};

// (sum f^r w dv)^{1/r} of a nonnegative nodal field; r = inf gives the max.
inline double lp_of(const std::vector<double>& f, const MetricField& mf, const Domain& dom, double r,
                    const std::vector<double>* weight = nullptr)
{
  if (std::isinf(r)) {
    double m = 0.0;
    dom.for_each(mf.grid.size(), [&](std::size_t i) { m = std::max(m, f[i]); });
    return m;
  }
  double s = 0.0;
  dom.for_each(mf.grid.size(), [&](std::size_t i) {
    if (f[i] == 0.0) return;
    double w = mf.volume_weight(i);
    if (weight) w *= (*weight)[i];
    s += std::pow(f[i], r) * w;
  });
  return std::pow(s, 1.0 / r);
}

inline std::vector<double> pointwise_modulus(const GridSection& u)
{
  std::vector<double> f(u.nodes());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = u.modulus(i);
  return f;
}

inline NormReport lp_norm(const GridSection& u, const MetricField& mf, const Domain& dom, double r,
                          const std::vector<double>* weight = nullptr)
{
  NormReport rep;
  rep.kind = weight ? "L^r weighted" : (dom.whole ? "L^r" : "L^r on ball");
  rep.value = lp_of(pointwise_modulus(u), mf, dom, r, weight);
  rep.resolution = u.nodes();
  return rep;
}

// |nabla u|, |nabla^2 u| with the metric, per node
inline std::vector<double> gradient_modulus(const CovariantDerivatives& cd, const MetricField& mf)
{
  const int n = cd.n, R = cd.rank;
  const std::size_t N = mf.grid.size();
  std::vector<double> f(N);
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0.0;
    for (int c = 0; c < R; ++c)
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
          s += mf.ginv_ij(i, p, q) *
               std::real(cd.grad[(i * R + c) * n + p] * std::conj(cd.grad[(i * R + c) * n + q]));
    f[i] = std::sqrt(std::max(s, 0.0));
  }
  return f;
}

inline std::vector<double> hessian_modulus(const CovariantDerivatives& cd, const MetricField& mf)
{
  const int n = cd.n, R = cd.rank;
  const std::size_t N = mf.grid.size();
  std::vector<double> f(N);
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0.0;
    const cplx* H = &cd.hess[i * R * n * n];
    for (int c = 0; c < R; ++c)
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              s += mf.ginv_ij(i, p, a) * mf.ginv_ij(i, q, b) *
                   std::real(H[c * n * n + p * n + q] * std::conj(H[c * n * n + a * n + b]));
    f[i] = std::sqrt(std::max(s, 0.0));
  }
  return f;
}

// Euclidean modulus of the full order-j chart derivative tensor
inline std::vector<double> chart_derivative_modulus(const GridSection& u, int j)
{
  const int n = u.grid.dim();
  std::vector<double> s(u.nodes(), 0.0);
  for (const auto& beta : multi_indices(n, j, j)) {
    double mult = std::tgamma(j + 1.0);
    for (int b : beta) mult /= std::tgamma(b + 1.0);
    GridSection d = partial(u, beta);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += mult * std::pow(d.modulus(i), 2);
  }
  for (auto& v : s) v = std::sqrt(v);
  return s;
}

// Per-order moduli |nabla^j u| for j = 0..k (covariant up to order 2, chart partials above).
inline std::vector<std::vector<double>> derivative_moduli(const GridSection& u, const MetricField& mf, int k)
{
  std::vector<std::vector<double>> out;
  out.push_back(pointwise_modulus(u));
  if (k >= 1) {
    auto cd = covariant_derivatives(u, mf, k >= 2 ? 2 : 1);
    out.push_back(gradient_modulus(cd, mf));
    if (k >= 2) out.push_back(hessian_modulus(cd, mf));
  }
  for (int j = 3; j <= k; ++j) out.push_back(chart_derivative_modulus(u, j));
  return out;
}

inline NormReport sobolev_from_moduli(const std::vector<std::vector<double>>& mods, const MetricField& mf,
                                      const Domain& dom, double r, const std::vector<double>* weight = nullptr)
{
  NormReport rep;
  const int k = static_cast<int>(mods.size()) - 1;
  rep.kind = k > 2 ? "chart-Sobolev W^{k,r}" : "W^{k,r}";
  rep.resolution = mf.grid.size();
  for (const auto& f : mods) {
    rep.parts.push_back(lp_of(f, mf, dom, r, weight));
    rep.value += rep.parts.back();
  }
  return rep;
}

inline NormReport sobolev_norm(const GridSection& u, const MetricField& mf, int k, double r,
                               const std::vector<double>* weight = nullptr, const Domain& dom = Domain::all())
{
  return sobolev_from_moduli(derivative_moduli(u, mf, k), mf, dom, r, weight);
}

// Value at the finer of two resolutions with the change under 2x refinement.
inline NormReport with_refinement(const std::function<NormReport(int level)>& eval)
{
  NormReport coarse = eval(0);
  NormReport fine = eval(1);
  fine.quadrature_error = std::abs(fine.value - coarse.value);
  return fine;
}

// ---------------------------------------------------------------- norm lemmas

struct HolderCheck {
  double lhs = 0.0, rhs_sharp = 0.0, rhs_scaled = 0.0;
  double ball_volume = 0.0;
  bool sharp_holds = false;
  bool scaled_holds = false;
  double slack = 0.0;        // rhs_sharp / lhs
  double scaled_ratio = 0.0;  // rhs_scaled / rhs_sharp
};

// ||u||_{L^r(B)} <= |B|^{1/r-1/t} ||u||_{L^t(B)}, and the form with R^{1/r-1/t}
inline HolderCheck ball_holder_check(const GridSection& u, const MetricField& mf, std::size_t center, double radius,
                                     double r, double t)
{
  if (!(r < t)) throw Error(ErrorCode::InvalidModel, "ball_holder_check needs r < t");
  HolderCheck h;
  Domain B = ball_domain(mf, center, radius);
  auto f = pointwise_modulus(u);
  h.ball_volume = domain_volume(mf, B);
  h.lhs = lp_of(f, mf, B, r);
  const double lt = lp_of(f, mf, B, t);
  const double e = 1.0 / r - (std::isinf(t) ? 0.0 : 1.0 / t);
  h.rhs_sharp = std::pow(h.ball_volume, e) * lt;
  h.rhs_scaled = std::pow(radius, e) * lt;
  h.sharp_holds = h.lhs <= h.rhs_sharp * (1 + 1e-12);
  h.scaled_holds = h.lhs <= h.rhs_scaled * (1 + 1e-12);
  h.slack = h.lhs > 0 ? h.rhs_sharp / h.lhs : 1.0;
  h.scaled_ratio = h.rhs_sharp > 0 ? h.rhs_scaled / h.rhs_sharp : 1.0;
  return h;
}

// Euclidean-ball quadrature of chart derivatives for the scaling lemmas:
// a box of cells of side h around B(0, rho), 5-point central differences.
namespace detail {

struct BoxField {
  int n = 0, M = 0;  // 2M cells per axis
  double h = 0.0;
  std::vector<double> val;
  std::size_t size() const { return val.size(); }
  double coord(int i) const { return (i + 0.5 - M) * h; }
};

inline BoxField sample_box(const std::function<double(const double*)>& f, int n, double rho, double h, int pad)
{
  BoxField b;
  b.n = n;
  b.h = h;
  b.M = static_cast<int>(std::ceil(rho / h - 1e-12)) + pad;
  const int L = 2 * b.M;
  std::size_t total = 1;
  for (int a = 0; a < n; ++a) total *= L;
  b.val.resize(total);
  std::vector<int> c(n, 0);
  double y[8];
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t r = idx;
    for (int a = n - 1; a >= 0; --a) {
      c[a] = static_cast<int>(r % L);
      r /= L;
    }
    for (int a = 0; a < n; ++a) y[a] = b.coord(c[a]);
    b.val[idx] = f(y);
  }
  return b;
}

inline BoxField box_derivative(const BoxField& in, int axis)
{
  BoxField out = in;
  const int L = 2 * in.M;
  std::size_t st = 1;
  for (int a = in.n - 1; a > axis; --a) st *= L;
  static const double w[5] = {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
  for (std::size_t idx = 0; idx < in.size(); ++idx) {
    const int i = static_cast<int>((idx / st) % L);
    if (i < 2 || i >= L - 2) {
      out.val[idx] = 0.0;
      continue;
    }
    double s = 0.0;
    for (int k = 0; k < 5; ++k) s += w[k] * in.val[idx + (k - 2) * static_cast<long>(st)];
    out.val[idx] = s / in.h;
  }
  return out;
}

// ||d^j f||_{L^r(B(0,rho))} for j = 0..m with Euclidean tensor moduli
inline std::vector<double> box_norms(const std::function<double(const double*)>& f, int n, double rho, double h, int m,
                                     const std::vector<double>& exps)
{
  BoxField base = sample_box(f, n, rho, h, 2 * m + 1);
  std::vector<std::vector<double>> mod2(m + 1, std::vector<double>(base.size(), 0.0));
  for (std::size_t i = 0; i < base.size(); ++i) mod2[0][i] = base.val[i] * base.val[i];
  for (int j = 1; j <= m; ++j)
    for (const auto& beta : multi_indices(n, j, j)) {
      double mult = std::tgamma(j + 1.0);
      for (int b : beta) mult /= std::tgamma(b + 1.0);
      BoxField d = base;
      for (int a = 0; a < n; ++a)
        for (int t = 0; t < beta[a]; ++t) d = box_derivative(d, a);
      for (std::size_t i = 0; i < d.size(); ++i) mod2[j][i] += mult * d.val[i] * d.val[i];
    }
  const int L = 2 * base.M;
  const double cell = std::pow(h, n);
  std::vector<double> out;
  for (std::size_t e = 0; e < exps.size(); ++e) {
    const int j = e <= static_cast<std::size_t>(m) ? static_cast<int>(e) : 0;
    const double r = exps[e];
    double s = 0.0;
    std::vector<int> c(n);
    for (std::size_t idx = 0; idx < base.size(); ++idx) {
      std::size_t q = idx;
      double rr = 0.0;
      for (int a = n - 1; a >= 0; --a) {
        c[a] = static_cast<int>(q % L);
        q /= L;
        rr += base.coord(c[a]) * base.coord(c[a]);
      }
      if (std::sqrt(rr) > rho) continue;
      s += std::pow(std::sqrt(mod2[j][idx]), r) * cell;
    }
    out.push_back(std::pow(s, 1.0 / r));
  }
  return out;
}

}  // namespace detail

struct ScalingRow {
  double R = 0.0;
  int order = 0;
  double lhs = 0.0;  // ||d^j u||_{L^r(B_R)}
  double rhs = 0.0;  // R^{-j+n/r} ||d^j v||_{L^r(B_1)}
  double tolerance = 0.0;
  double error = 0.0;
  bool ok = false;
};

struct ScalingReport {
  int n = 0, m = 0;
  double r = 0.0, t = 0.0;
  double h = 0.0;
  std::vector<ScalingRow> rows;
  std::vector<double> Rs, C;  // Sobolev constant per R against sum_j R^j ||d^j u|| (max over the family)
  double slope = 0.0;
  bool lemma_ok = false;      // ||u||_{L^t} <= max_R C(R) R^{-m} ||u||_{W^{m,r}} on every instance
  double lemma_min_slack = 0.0;
  double spread = 0.0;        // max C / min C - 1
  bool identities_ok = false;
  bool constant_ok = false;
};

// Scaling identities ||d^j u||_{L^r(B_R)} = R^{-j+n/r} ||d^j v||_{L^r(B_1)} for
// u(y) = v(y/R), each side evaluated at spacing h and h/2 (refinement delta as
// tolerance), and the embedding constant C(R) with t = S_m(r) fitted against the
// scale-weighted norm; the unweighted inequality is then checked with max_R C(R).
inline ScalingReport scaling_check(const std::vector<std::function<double(const double*)>>& family, int n,
                                   const std::vector<double>& Rs, int m, double r, double t, double h = 1.0 / 64)
{
  ScalingReport rep;
  rep.n = n;
  rep.m = m;
  rep.r = r;
  rep.t = t;
  rep.h = h;
  rep.Rs = Rs;
  rep.identities_ok = true;
  std::vector<double> exps;
  for (int j = 0; j <= m; ++j) exps.push_back(r);
  exps.push_back(t);  // index m+1: L^t of the function itself
  std::vector<double> C(Rs.size(), 0.0);
  std::vector<std::pair<double, double>> lemma;  // (||u||_{L^t}, R^{-m} ||u||_{W^{m,r}}) per instance
  for (const auto& v : family) {
    auto v0 = detail::box_norms(v, n, 1.0, h, m, exps);
    auto v1 = detail::box_norms(v, n, 1.0, 0.5 * h, m, exps);
    for (std::size_t ir = 0; ir < Rs.size(); ++ir) {
      const double R = Rs[ir];
      auto u = [&](const double* y) {
        double z[8];
        for (int a = 0; a < n; ++a) z[a] = y[a] / R;
        return v(z);
      };
      auto u0 = detail::box_norms(u, n, R, h, m, exps);
      auto u1 = detail::box_norms(u, n, R, 0.5 * h, m, exps);
      for (int j = 0; j <= m; ++j) {
        ScalingRow row;
        row.R = R;
        row.order = j;
        const double f = std::pow(R, -j + n / r);
        row.lhs = u1[j];
        row.rhs = f * v1[j];
        row.tolerance = 2.0 * (std::abs(u1[j] - u0[j]) + f * std::abs(v1[j] - v0[j])) + 1e-13 * std::abs(row.rhs);
        row.error = std::abs(row.lhs - row.rhs);
        row.ok = row.error <= row.tolerance;
        rep.identities_ok = rep.identities_ok && row.ok;
        rep.rows.push_back(row);
      }
      // scale-weighted norm sum_j R^j ||d^j u||, which is R^{n/r} ||v||_{W^{m,r}(B_1)}
      double W = 0.0, Wu = 0.0;
      for (int j = 0; j <= m; ++j) {
        W += std::pow(R, j) * u1[j];
        Wu += u1[j];
      }
      const double lt = u1[m + 1];
      if (W > 0) C[ir] = std::max(C[ir], lt / (std::pow(R, -m) * W));
      lemma.push_back({lt, std::pow(R, -m) * Wu});
    }
  }
  rep.C = C;
  const double Cmax = *std::max_element(C.begin(), C.end());
  rep.lemma_ok = true;
  rep.lemma_min_slack = INFINITY;
  for (auto [lt, rhs] : lemma) {
    if (lt <= 0) continue;
    rep.lemma_min_slack = std::min(rep.lemma_min_slack, Cmax * rhs / lt);
    if (lt > Cmax * rhs * (1 + 1e-12)) rep.lemma_ok = false;
  }
  double cmin = *std::min_element(C.begin(), C.end()), cmax = *std::max_element(C.begin(), C.end());
  rep.spread = cmax / cmin - 1.0;
  // least-squares slope of log C against log R
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(Rs.size());
  for (std::size_t i = 0; i < Rs.size(); ++i) {
    const double x = std::log(Rs[i]), y = std::log(C[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  rep.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  rep.constant_ok = rep.spread <= 0.05;
  return rep;
}

struct SobolevComparison {
  double metric_norm = 0.0, flat_norm = 0.0;
  double ratio = 0.0;
  double fitted_C = 0.0;  // |ratio - 1| / eps
  bool inner_containment = false;
  bool outer_containment = false;
};

// Metric W^{k,r} norm on the geodesic ball against the flat-chart norm on the
// Euclidean ball of the same radius, plus the node-wise two-sided containment.
inline SobolevComparison sobolev_comparison(const GridSection& u, const MetricField& mf, std::size_t center, double R,
                                            int k, double r, double eps)
{
  SobolevComparison sc;
  ManifoldModel flat = mf.model;
  flat.kind = ManifoldKind::flat_torus;
  flat.amplitude = 0.0;
  MetricField fm = detail::sample_metric(flat, mf.grid.shape);
  DistanceEngine eng(mf);
  auto geo = eng.ball(center, R);
  std::vector<char> in_geo(mf.grid.size(), 0);
  for (auto [v, d] : geo) in_geo[v] = 1;
  const auto xc = mf.grid.coords(center);
  std::vector<std::size_t> eucl;
  sc.inner_containment = true;
  sc.outer_containment = true;
  for (std::size_t i = 0; i < mf.grid.size(); ++i) {
    auto y = mf.grid.coords(i);
    double s = 0.0;
    for (int a = 0; a < mf.n(); ++a) {
      double d = mf.grid.periodic[a] ? wrap_displacement(y[a] - xc[a], mf.grid.lengths[a]) : y[a] - xc[a];
      s += d * d;
    }
    const double de = std::sqrt(s);
    if (de <= R) eucl.push_back(i);
    if (de <= (1 - eps) * R && !in_geo[i]) sc.inner_containment = false;
    if (in_geo[i] && de > (1 + eps) * R) sc.outer_containment = false;
  }
  std::vector<std::size_t> gn;
  for (auto [v, d] : geo) gn.push_back(v);
  sc.metric_norm = sobolev_norm(u, mf, k, r, nullptr, Domain::of(gn)).value;
  sc.flat_norm = sobolev_norm(u, fm, k, r, nullptr, Domain::of(eucl)).value;
  sc.ratio = sc.flat_norm > 0 ? sc.metric_norm / sc.flat_norm : 1.0;
  sc.fitted_C = std::abs(sc.ratio - 1.0) / eps;
  return sc;
}

// ---------------------------------------------------------------- CSV

inline void write_section_csv(const std::string& path, const GridSection& u)
{
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IOError, "cannot write " + path);
  os.precision(17);
  for (int a = 0; a < u.grid.dim(); ++a) os << "x" << a << ",";
  for (int c = 0; c < u.rank; ++c) os << "re" << c << ",im" << c << (c + 1 < u.rank ? "," : "\n");
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    for (double v : u.grid.coords(i)) os << v << ",";
    for (int c = 0; c < u.rank; ++c)
      os << u.at(i, c).real() << "," << u.at(i, c).imag() << (c + 1 < u.rank ? "," : "\n");
  }
}

inline GridSection read_section_csv(const std::string& path, const Grid& grid, int rank)
{
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IOError, "cannot read " + path);
  GridSection u(grid, rank);
  std::string line;
  std::getline(is, line);
  std::size_t node = 0;
  while (std::getline(is, line) && node < grid.size()) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    const std::size_t off = static_cast<std::size_t>(grid.dim());
    if (vals.size() != off + 2 * static_cast<std::size_t>(rank))
      throw Error(ErrorCode::IOError, "bad column count in " + path);
    for (int c = 0; c < rank; ++c) u.at(node, c) = cplx(vals[off + 2 * c], vals[off + 2 * c + 1]);
    ++node;
  }
  if (node != grid.size()) throw Error(ErrorCode::IOError, "section CSV has too few rows: " + path);
  return u;
}

}  // namespace lirlab
