#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <array>
#include <map>
#include <memory>

#include "lirlab/fields.hpp"

namespace lirlab {

// Du = sum_t A_t(x) d^{alpha_t} u, one term per multi-index (given as a list of axes).
struct CoefficientTerm {
  std::vector<int> axes;         // 0, 1 or 2 entries
  Eigen::MatrixXcd A;            // constant coefficient, or the average of `field`
  std::vector<cplx> field;       // per-node N x N, row-major; empty when constant
  bool variable() const { return !field.empty(); }
  int order() const { return static_cast<int>(axes.size()); }
};

// Abstract operator interface shared by D and its adjoint.
class OperatorView {
public:
  virtual ~OperatorView() = default;
  virtual int rank() const = 0;
  virtual const MetricField& metric() const = 0;
  virtual GridSection apply(const GridSection& u) const = 0;
  virtual GridSection apply_adjoint(const GridSection& v) const = 0;
  // exact symbol on the constant path, frozen-coefficient symbol otherwise
  virtual Eigen::MatrixXcd symbol(const std::vector<double>& k) const = 0;
  virtual bool constant_path() const = 0;
  virtual std::string name() const = 0;
};

class EllipticOperator : public OperatorView {
public:
  std::string label;
  int order = 2;
  int N = 1;
  MetricField mf;
  std::vector<CoefficientTerm> terms;

  int rank() const override { return N; }
  const MetricField& metric() const override { return mf; }
  std::string name() const override { return label; }

  bool constant_path() const override
  {
    if (!mf.flat() || !mf.grid.fully_periodic()) return false;
    for (const auto& t : terms)
      if (t.variable()) return false;
    return true;
  }

  void check(const GridSection& u) const
  {
    if (u.rank != N) throw Error(ErrorCode::RankMismatch, "section rank " + std::to_string(u.rank) + " vs operator rank " + std::to_string(N));
    if (u.grid != mf.grid) throw Error(ErrorCode::RankMismatch, "section grid does not match the operator grid");
  }

  GridSection apply(const GridSection& u) const override
  {
    check(u);
    GridSection out(u.grid, N);
    std::map<std::vector<int>, GridSection> cache;
    for (const auto& t : terms) {
      std::vector<int> beta(mf.n(), 0);
      for (int a : t.axes) ++beta[a];
      auto it = cache.find(beta);
      if (it == cache.end()) it = cache.emplace(beta, partial(u, beta)).first;
      accumulate(out, t, it->second, false);
    }
    return out;
  }

  // D* v = (1/sqrt g) sum_t (-1)^{|alpha|} d^alpha (A_t^H sqrt(g) v), the adjoint in L^2(dv_g)
  GridSection apply_adjoint(const GridSection& v) const override
  {
    check(v);
    GridSection w = v;
    const bool curved = !mf.flat();
    if (curved)
      for (std::size_t i = 0; i < w.nodes(); ++i)
        for (int c = 0; c < N; ++c) w.at(i, c) *= mf.sqrt_det[i];
    GridSection out(v.grid, N);
    for (const auto& t : terms) {
      GridSection z(v.grid, N);
      accumulate(z, t, w, true);
      std::vector<int> beta(mf.n(), 0);
      for (int a : t.axes) ++beta[a];
      z = partial(z, beta);
      if (t.order() % 2 == 1) z *= cplx(-1.0);
      out += z;
    }
    if (curved)
      for (std::size_t i = 0; i < out.nodes(); ++i)
        for (int c = 0; c < N; ++c) out.at(i, c) /= mf.sqrt_det[i];
    return out;
  }

  Eigen::MatrixXcd symbol(const std::vector<double>& k) const override
  {
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(N, N);
    for (const auto& t : terms) {
      cplx f(1.0);
      for (int a : t.axes) f *= cplx(0.0, k[a]);
      S += f * t.A;
    }
    return S;
  }

  // sigma_xi(x) = sum over top-order terms of A_t(x) xi^alpha
  Eigen::MatrixXcd principal_symbol(std::size_t node, const std::vector<double>& xi) const
  {
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(N, N);
    for (const auto& t : terms) {
      if (t.order() != order) continue;
      double f = 1.0;
      for (int a : t.axes) f *= xi[a];
      S += f * coefficient(t, node);
    }
    return S;
  }

  Eigen::MatrixXcd coefficient(const CoefficientTerm& t, std::size_t node) const
  {
    if (!t.variable()) return t.A;
    Eigen::MatrixXcd M(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) M(i, j) = t.field[node * N * N + i * N + j];
    return M;
  }

private:
  void accumulate(GridSection& out, const CoefficientTerm& t, const GridSection& d, bool hermitian) const
  {
    const std::size_t nodes = d.nodes();
    if (!t.variable()) {
      Eigen::MatrixXcd A = hermitian ? Eigen::MatrixXcd(t.A.adjoint()) : t.A;
      if (N == 1) {
        const cplx a = A(0, 0);
        for (std::size_t i = 0; i < nodes; ++i) out.values[i] += a * d.values[i];
        return;
      }
      for (std::size_t i = 0; i < nodes; ++i)
        for (int r = 0; r < N; ++r) {
          cplx s(0.0);
          for (int c = 0; c < N; ++c) s += A(r, c) * d.values[i * N + c];
          out.values[i * N + r] += s;
        }
      return;
    }
    for (std::size_t i = 0; i < nodes; ++i) {
      const cplx* M = &t.field[i * N * N];
      for (int r = 0; r < N; ++r) {
        cplx s(0.0);
        for (int c = 0; c < N; ++c) s += (hermitian ? std::conj(M[c * N + r]) : M[r * N + c]) * d.values[i * N + c];
        out.values[i * N + r] += s;
      }
    }
  }
};

// D* presented as an operator in its own right; its adjoint is D.
class AdjointView : public OperatorView {
public:
  explicit AdjointView(const OperatorView& D) : D_(&D) {}
  int rank() const override { return D_->rank(); }
  const MetricField& metric() const override { return D_->metric(); }
  GridSection apply(const GridSection& u) const override { return D_->apply_adjoint(u); }
  GridSection apply_adjoint(const GridSection& v) const override { return D_->apply(v); }
  Eigen::MatrixXcd symbol(const std::vector<double>& k) const override { return D_->symbol(k).adjoint(); }
  bool constant_path() const override { return D_->constant_path(); }
  std::string name() const override { return D_->name() + "*"; }

private:
  const OperatorView* D_;
};

// ---------------------------------------------------------------- operator catalogue

namespace detail {

inline void set_average(CoefficientTerm& t, int N, std::size_t nodes)
{
  t.A = Eigen::MatrixXcd::Zero(N, N);
  for (std::size_t i = 0; i < nodes; ++i)
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) t.A(r, c) += t.field[i * N * N + r * N + c];
  t.A /= static_cast<double>(nodes);
}

}  // namespace detail

// Hodge Laplacian on functions, Delta = d*d (nonnegative), plus c.
// On a curved metric this is -g^{pq}(d_pq - Gamma^k_pq d_k) + c.
inline EllipticOperator hodge_laplacian(const MetricField& mf, double c = 0.0)
{
  EllipticOperator D;
  D.label = c == 0.0 ? "hodge_laplacian" : "laplacian_plus_c";
  D.order = 2;
  D.N = 1;
  D.mf = mf;
  const int n = mf.n();
  const std::size_t nodes = mf.grid.size();
  if (mf.flat()) {
    for (int p = 0; p < n; ++p) D.terms.push_back({{p, p}, -Eigen::MatrixXcd::Identity(1, 1), {}});
  } else {
    auto ch = christoffel(mf);
    for (int p = 0; p < n; ++p)
      for (int q = p; q < n; ++q) {
        CoefficientTerm t;
        t.axes = {p, q};
        t.field.resize(nodes);
        for (std::size_t i = 0; i < nodes; ++i) t.field[i] = -(p == q ? 1.0 : 2.0) * mf.ginv_ij(i, p, q);
        detail::set_average(t, 1, nodes);
        D.terms.push_back(std::move(t));
      }
    for (int k = 0; k < n; ++k) {
      CoefficientTerm t;
      t.axes = {k};
      t.field.resize(nodes);
      for (std::size_t i = 0; i < nodes; ++i) {
        double s = 0.0;
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q) s += mf.ginv_ij(i, p, q) * ch.at(i, k, p, q);
        t.field[i] = s;
      }
      detail::set_average(t, 1, nodes);
      D.terms.push_back(std::move(t));
    }
  }
  if (c != 0.0) D.terms.push_back({{}, c * Eigen::MatrixXcd::Identity(1, 1), {}});
  return D;
}

inline std::array<Eigen::Matrix2cd, 3> pauli()
{
  Eigen::Matrix2cd s1, s2, s3;
  s1 << 0, 1, 1, 0;
  s2 << 0, cplx(0, -1), cplx(0, 1), 0;
  s3 << 1, 0, 0, -1;
  return {s1, s2, s3};
}

// Dirac-type D = sigma . nabla on rank-2 sections over a 3-dimensional chart.
inline EllipticOperator dirac_operator(const MetricField& mf)
{
  if (mf.n() != 3) throw Error(ErrorCode::InvalidModel, "the Dirac-type operator needs dimension 3");
  EllipticOperator D;
  D.label = "dirac";
  D.order = 1;
  D.N = 2;
  D.mf = mf;
  auto s = pauli();
  for (int p = 0; p < 3; ++p) D.terms.push_back({{p}, s[p], {}});
  return D;
}

// d^2/dx_axis^2 alone, the degenerate example.
inline EllipticOperator degenerate_operator(const MetricField& mf, int axis = 0)
{
  EllipticOperator D;
  D.label = "degenerate";
  D.order = 2;
  D.N = 1;
  D.mf = mf;
  D.terms.push_back({{axis, axis}, Eigen::MatrixXcd::Identity(1, 1), {}});
  return D;
}

// ---------------------------------------------------------------- ellipticity

struct EllipticityReport {
  std::size_t samples = 0;
  double min_norm = INFINITY, max_norm = 0.0;        // ||sigma_xi||
  double min_inv_norm = INFINITY, max_inv_norm = 0.0; // ||sigma_xi^{-1}||
  double c1_bound = 0.0;                              // sup |A| + sup |dA| over variable coefficients
  bool pass = false;
  std::size_t witness_node = 0;
  std::vector<double> witness_xi;
};

inline EllipticityReport ellipticity_audit(const EllipticOperator& D, std::size_t samples = 1000,
                                           double condition_cap = 1e8, std::uint64_t seed = 11,
                                           bool throw_on_failure = true)
{
  if (samples < 1000) samples = 1000;
  EllipticityReport rep;
  const int n = D.mf.n();
  const std::size_t nodes = D.mf.grid.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, nodes - 1);
  std::normal_distribution<double> G(0.0, 1.0);

  // coordinate axes and diagonals first, then random directions
  std::vector<std::vector<double>> dirs;
  for (int p = 0; p < n; ++p) {
    std::vector<double> e(n, 0.0);
    e[p] = 1.0;
    dirs.push_back(e);
  }
  {
    std::vector<int> o(n, -1);
    for (;;) {
      int nz = 0;
      for (int v : o) nz += v != 0;
      if (nz >= 2) {
        std::vector<double> e(o.begin(), o.end());
        for (auto& v : e) v /= std::sqrt(static_cast<double>(nz));
        dirs.push_back(e);
      }
      int a = n - 1;
      while (a >= 0 && o[a] == 1) {
        o[a] = -1;
        --a;
      }
      if (a < 0) break;
      ++o[a];
    }
  }
  rep.pass = true;
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<double> xi(n);
    if (s < dirs.size()) {
      xi = dirs[s];
    } else {
      double nn = 0.0;
      do {
        nn = 0.0;
        for (auto& v : xi) {
          v = G(rng);
          nn += v * v;
        }
      } while (nn < 1e-12);
      for (auto& v : xi) v /= std::sqrt(nn);
    }
    const std::size_t node = s == 0 ? 0 : pick(rng);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(D.principal_symbol(node, xi));
    const auto& sv = svd.singularValues();
    const double smax = sv(0), smin = sv(sv.size() - 1);
    ++rep.samples;
    rep.min_norm = std::min(rep.min_norm, smax);
    rep.max_norm = std::max(rep.max_norm, smax);
    const double inv = smin > 0 ? 1.0 / smin : INFINITY;
    rep.min_inv_norm = std::min(rep.min_inv_norm, inv);
    rep.max_inv_norm = std::max(rep.max_inv_norm, inv);
    if (rep.pass && !(smin > 0 && smax / smin <= condition_cap)) {
      rep.pass = false;
      rep.witness_node = node;
      rep.witness_xi = xi;
    }
  }
  for (const auto& t : D.terms) {
    if (!t.variable()) {
      rep.c1_bound = std::max(rep.c1_bound, t.A.norm());
      continue;
    }
    double sup = 0.0, dsup = 0.0;
    for (int a = 0; a < n; ++a) {
      std::vector<cplx> f = t.field;
      partial_inplace(f, D.mf.grid, D.N * D.N, a, 1);
      for (auto v : f) dsup = std::max(dsup, std::abs(v));
    }
    for (auto v : t.field) sup = std::max(sup, std::abs(v));
    rep.c1_bound = std::max(rep.c1_bound, sup + dsup);
  }
  if (!rep.pass && throw_on_failure) {
    std::ostringstream os;
    os << "principal symbol singular at node " << rep.witness_node << ", xi = (";
    for (int a = 0; a < n; ++a) os << (a ? "," : "") << rep.witness_xi[a];
    os << ")";
    throw Error(ErrorCode::NotElliptic, os.str());
  }
  return rep;
}

// ---------------------------------------------------------------- kernels and solves

struct HarmonicBasis {
  std::vector<GridSection> e;
  double threshold = 0.0;
  double operator_norm = 0.0;
  double gram_residual = 0.0;  // max |<e_j,e_k> - delta_jk|
  double max_residual = 0.0;   // max ||V e_j|| for the map V whose kernel this is
  std::size_t size() const { return e.size(); }
};

struct SolveTrace {
  std::vector<double> residuals;  // relative, per iteration
  int iterations = 0;
  bool spectral = false;
};

struct SolverOptions {
  double kernel_factor = 1e-8;
  double tolerance = 1e-9;
  double orthogonality = 1e-8;
  int restart = 60;
  int max_restarts = 40;
  int max_eig_iterations = 400;
};

inline cplx winner(const GridSection& a, const GridSection& b, const MetricField& mf) { return inner(a, b, mf); }

inline void axpy(GridSection& y, cplx a, const GridSection& x)
{
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += a * x.values[i];
}

inline GridSection harmonic_projection(const GridSection& v, const HarmonicBasis& basis, const MetricField& mf)
{
  GridSection h(v.grid, v.rank);
  for (const auto& e : basis.e) axpy(h, inner(v, e, mf), e);
  return h;
}

inline void project_out(GridSection& v, const HarmonicBasis& basis, const MetricField& mf)
{
  for (const auto& e : basis.e) axpy(v, -inner(v, e, mf), e);
}

inline double max_coefficient(const GridSection& v, const HarmonicBasis& basis, const MetricField& mf)
{
  double m = 0.0;
  for (const auto& e : basis.e) m = std::max(m, std::abs(inner(v, e, mf)));
  return m;
}

namespace detail {

inline std::vector<double> frequency_vector(const Grid& grid, std::size_t idx)
{
  auto c = grid.unravel(idx);
  std::vector<double> k(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) k[a] = wavenumber(grid, a, c[a]);
  return k;
}

// per-frequency matrices applied in Fourier space
inline GridSection apply_multiplier(const GridSection& u, const std::vector<Eigen::MatrixXcd>& mats)
{
  GridSection w = u;
  const int N = u.rank;
  fft_forward(w.values, w.grid, N);
  Eigen::VectorXcd x(N);
  for (std::size_t i = 0; i < w.nodes(); ++i) {
    for (int c = 0; c < N; ++c) x(c) = w.values[i * N + c];
    Eigen::VectorXcd y = mats[i] * x;
    for (int c = 0; c < N; ++c) w.values[i * N + c] = y(c);
  }
  fft_inverse(w.values, w.grid, N);
  return w;
}

inline void orthonormalize(std::vector<GridSection>& S, const MetricField& mf, double drop = 1e-10)
{
  std::vector<GridSection> out;
  for (auto& s : S) {
    const double n0 = l2(s, mf);
    if (n0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : out) axpy(s, -inner(s, q, mf), q);
    const double n1 = l2(s, mf);
    if (n1 <= drop * n0) continue;
    s *= cplx(1.0 / n1);
    out.push_back(std::move(s));
  }
  S = std::move(out);
}

inline GridSection random_section(const Grid& grid, int N, std::mt19937_64& rng)
{
  std::normal_distribution<double> G(0.0, 1.0);
  GridSection s(grid, N);
  for (auto& v : s.values) v = cplx(G(rng), G(rng));
  return s;
}

}  // namespace detail

// Minimum-norm solver for D u = omega. On the constant path everything is
// per-frequency linear algebra; otherwise the kernels come from a
// preconditioned block eigensolve and the solve from deflated GMRES.
class MinNormSolver {
public:
  explicit MinNormSolver(const OperatorView& D, SolverOptions opt = {}) : D_(&D), opt_(opt)
  {
    const Grid& grid = D.metric().grid;
    if (!grid.fully_periodic())
      throw Error(ErrorCode::InvalidModel, "global solves need a boundary-free (fully periodic) grid");
    build_spectral();
    if (D.constant_path()) {
      spectral_bases();
    } else {
      harmonic_ = iterative_kernel(true);
      kernel_ = iterative_kernel(false);
    }
  }

  bool spectral() const { return D_->constant_path(); }
  const HarmonicBasis& harmonic() const { return harmonic_; }
  const HarmonicBasis& kernel() const { return kernel_; }
  const OperatorView& op() const { return *D_; }

  GridSection solve(const GridSection& omega, SolveTrace* trace = nullptr) const
  {
    const MetricField& mf = D_->metric();
    const double wn = l2(omega, mf);
    const double mc = max_coefficient(omega, harmonic_, mf);
    if (mc > opt_.orthogonality * std::max(wn, 1e-300) && mc > 0)
      throw Error(ErrorCode::NotOrthogonal, "max_j |<omega, e_j>| = " + std::to_string(mc), mc);
    if (wn == 0.0) return GridSection(omega.grid, omega.rank);
    if (spectral()) {
      if (trace) {
        trace->spectral = true;
        trace->iterations = 1;
      }
      GridSection u = detail::apply_multiplier(omega, pinv_);
      if (trace) trace->residuals.push_back(l2(D_->apply(u) - omega, mf) / wn);
      return u;
    }
    return gmres(omega, trace);
  }

  // frozen-coefficient pseudo-inverse, exact on the constant path
  GridSection frozen_pinv(const GridSection& omega) const { return detail::apply_multiplier(omega, pinv_); }

private:
  void build_spectral()
  {
    const Grid& grid = D_->metric().grid;
    const int N = D_->rank();
    const std::size_t F = grid.size();
    svd_U_.resize(F);
    svd_V_.resize(F);
    svd_S_.resize(F);
    double smax = 0.0;
    for (std::size_t i = 0; i < F; ++i) {
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(D_->symbol(detail::frequency_vector(grid, i)),
                                            Eigen::ComputeFullU | Eigen::ComputeFullV);
      svd_U_[i] = svd.matrixU();
      svd_V_[i] = svd.matrixV();
      svd_S_[i] = svd.singularValues();
      smax = std::max(smax, svd_S_[i](0));
    }
    frozen_norm_ = smax;
    thr_ = opt_.kernel_factor * smax;
    pinv_.resize(F);
    for (std::size_t i = 0; i < F; ++i) {
      Eigen::MatrixXcd Sinv = Eigen::MatrixXcd::Zero(N, N);
      for (int c = 0; c < N; ++c)
        if (svd_S_[i](c) > thr_) Sinv(c, c) = 1.0 / svd_S_[i](c);
      pinv_[i] = svd_V_[i] * Sinv * svd_U_[i].adjoint();
    }
  }

  void spectral_bases()
  {
    const MetricField& mf = D_->metric();
    const Grid& grid = mf.grid;
    const int N = D_->rank();
    const double vol = mf.total_volume();
    harmonic_.threshold = kernel_.threshold = thr_;
    harmonic_.operator_norm = kernel_.operator_norm = frozen_norm_;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (int c = 0; c < N; ++c) {
        const double s = svd_S_[i](c);
        if (s > 0.1 * thr_ && s < 10.0 * thr_)
          throw Error(ErrorCode::ThresholdAmbiguous, "singular value near the kernel threshold", s);
        if (s > thr_) continue;
        auto k = detail::frequency_vector(grid, i);
        harmonic_.e.push_back(plane_wave(grid, k, svd_U_[i].col(c), vol));
        kernel_.e.push_back(plane_wave(grid, k, svd_V_[i].col(c), vol));
      }
    }
    finish(harmonic_, true);
    finish(kernel_, false);
  }

  static GridSection plane_wave(const Grid& grid, const std::vector<double>& k, const Eigen::VectorXcd& v, double vol)
  {
    const int N = static_cast<int>(v.size());
    GridSection e(grid, N);
    const double s = 1.0 / std::sqrt(vol);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      auto x = grid.coords(i);
      double ph = 0.0;
      for (int a = 0; a < grid.dim(); ++a) ph += k[a] * x[a];
      const cplx w = s * std::exp(cplx(0.0, ph));
      for (int c = 0; c < N; ++c) e.at(i, c) = w * v(c);
    }
    return e;
  }

  GridSection map(const GridSection& x, bool adjoint_kernel) const
  {
    return adjoint_kernel ? D_->apply_adjoint(x) : D_->apply(x);
  }

  void finish(HarmonicBasis& b, bool adjoint_kernel) const
  {
    const MetricField& mf = D_->metric();
    b.gram_residual = 0.0;
    b.max_residual = 0.0;
    for (std::size_t j = 0; j < b.e.size(); ++j) {
      for (std::size_t k = 0; k < b.e.size(); ++k)
        b.gram_residual = std::max(b.gram_residual, std::abs(inner(b.e[j], b.e[k], mf) - cplx(j == k ? 1.0 : 0.0)));
      b.max_residual = std::max(b.max_residual, l2(map(b.e[j], adjoint_kernel), mf));
    }
  }

  // Null space of V = D* (adjoint_kernel) or V = D, as the lowest eigenspace of
  // A = V^* V, preconditioned with the frozen-coefficient inverse.
  HarmonicBasis iterative_kernel(bool adjoint_kernel) const
  {
    const MetricField& mf = D_->metric();
    const Grid& grid = mf.grid;
    const int N = D_->rank();
    const std::size_t F = grid.size();
    auto A = [&](const GridSection& x) {
      return adjoint_kernel ? D_->apply(D_->apply_adjoint(x)) : D_->apply_adjoint(D_->apply(x));
    };
    // frozen null vectors as the starting block
    std::vector<GridSection> X;
    const double vol = mf.total_volume();
    for (std::size_t i = 0; i < F; ++i)
      for (int c = 0; c < N; ++c)
        if (svd_S_[i](c) <= thr_)
          X.push_back(plane_wave(grid, detail::frequency_vector(grid, i),
                                 adjoint_kernel ? svd_U_[i].col(c) : svd_V_[i].col(c), vol));
    const std::size_t block = X.size() + 2;
    std::mt19937_64 rng(20240905);
    while (X.size() < block) X.push_back(detail::random_section(grid, N, rng));

    // operator norm of V by power iteration on A
    GridSection p = detail::random_section(grid, N, rng);
    double lam = 0.0;
    for (int it = 0; it < 30; ++it) {
      p *= cplx(1.0 / l2(p, mf));
      GridSection q = A(p);
      lam = l2(q, mf);
      p = std::move(q);
    }
    const double vnorm = std::sqrt(lam);
    const double thr = opt_.kernel_factor * vnorm;

    // preconditioner (M(k) + shift)^{-1}, M the frozen symbol of A
    std::vector<Eigen::MatrixXcd> T(F);
    const double shift = 1e-6 * frozen_norm_ * frozen_norm_;
    for (std::size_t i = 0; i < F; ++i) {
      Eigen::MatrixXcd S = D_->symbol(detail::frequency_vector(grid, i));
      Eigen::MatrixXcd M = adjoint_kernel ? Eigen::MatrixXcd(S * S.adjoint()) : Eigen::MatrixXcd(S.adjoint() * S);
      M += shift * Eigen::MatrixXcd::Identity(N, N);
      T[i] = M.inverse();
    }

    auto rayleigh_ritz = [&](std::vector<GridSection>& S, std::vector<GridSection>& AS, std::size_t keep,
                             Eigen::VectorXd& lambda) {
      const int m = static_cast<int>(S.size());
      Eigen::MatrixXcd H(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) H(i, j) = inner(AS[j], S[i], mf);
      H = 0.5 * (H + H.adjoint()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
      const int k = std::min<int>(static_cast<int>(keep), m);
      std::vector<GridSection> Xn, AXn;
      lambda = es.eigenvalues().head(k);
      for (int c = 0; c < k; ++c) {
        GridSection x(grid, N), ax(grid, N);
        for (int i = 0; i < m; ++i) {
          axpy(x, es.eigenvectors()(i, c), S[i]);
          axpy(ax, es.eigenvectors()(i, c), AS[i]);
        }
        Xn.push_back(std::move(x));
        AXn.push_back(std::move(ax));
      }
      return std::make_pair(Xn, AXn);
    };

    detail::orthonormalize(X, mf);
    std::vector<GridSection> AX;
    for (auto& x : X) AX.push_back(A(x));
    Eigen::VectorXd lambda;
    std::tie(X, AX) = rayleigh_ritz(X, AX, block, lambda);
    std::vector<GridSection> P;
    bool converged = false;
    std::vector<double> sig;
    for (int it = 0; it < opt_.max_eig_iterations; ++it) {
      sig.assign(X.size(), 0.0);
      bool done = true;
      std::vector<GridSection> W;
      for (std::size_t c = 0; c < X.size(); ++c) {
        GridSection r = AX[c];
        axpy(r, cplx(-lambda(c)), X[c]);
        const double rn = l2(r, mf);
        sig[c] = std::sqrt(std::max(lambda(c), 0.0));
        const bool kernel_like = sig[c] < thr;
        if (kernel_like) {
          if (rn > 1e-3 * thr * vnorm) done = false;
        } else if (rn > 1e-3 * std::max(lambda(c), thr * thr)) {
          done = false;
        }
        W.push_back(detail::apply_multiplier(r, T));
      }
      if (done) {
        converged = true;
        break;
      }
      std::vector<GridSection> S = X;
      for (auto& w : W) S.push_back(std::move(w));
      for (auto& q : P) S.push_back(q);
      detail::orthonormalize(S, mf, 1e-12);
      std::vector<GridSection> AS;
      for (auto& s : S) AS.push_back(A(s));
      std::vector<GridSection> Xold = X;
      std::tie(X, AX) = rayleigh_ritz(S, AS, block, lambda);
      // search directions: new iterates minus their component in the old block
      P.clear();
      for (auto& x : X) {
        GridSection d = x;
        for (auto& xo : Xold) axpy(d, -inner(d, xo, mf), xo);
        if (l2(d, mf) > 1e-14) P.push_back(std::move(d));
      }
    }
    if (!converged) throw Error(ErrorCode::NoConvergence, "kernel eigensolve did not converge");

    HarmonicBasis b;
    b.threshold = thr;
    b.operator_norm = vnorm;
    for (std::size_t c = 0; c < X.size(); ++c) {
      const double s = l2(map(X[c], adjoint_kernel), mf);
      if (s > 0.1 * thr && s < 10.0 * thr)
        throw Error(ErrorCode::ThresholdAmbiguous, "singular value near the kernel threshold", s);
      if (s > thr) continue;
      b.e.push_back(X[c]);
    }
    if (b.e.size() + 1 > block)
      throw Error(ErrorCode::ThresholdAmbiguous, "kernel fills the search block; dimension not separated");
    detail::orthonormalize(b.e, mf);
    finish(b, adjoint_kernel);
    return b;
  }

  // right-preconditioned restarted GMRES in the L^2(dv_g) inner product
  GridSection gmres(const GridSection& omega, SolveTrace* trace) const
  {
    const MetricField& mf = D_->metric();
    GridSection b = omega;
    project_out(b, harmonic_, mf);
    const double bn = l2(b, mf);
    GridSection u(omega.grid, omega.rank);
    GridSection r = b;
    double rel = 1.0;
    int total = 0;
    const int m = opt_.restart;
    std::vector<double> history;
    for (int cycle = 0; cycle < opt_.max_restarts && rel > opt_.tolerance; ++cycle) {
      const double beta = l2(r, mf);
      std::vector<GridSection> V;
      V.push_back(r);
      V.back() *= cplx(1.0 / beta);
      Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
      std::vector<std::complex<double>> cs(m), sn(m);
      Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
      g(0) = beta;
      int j = 0;
      for (; j < m; ++j) {
        GridSection w = D_->apply(frozen_pinv(V[j]));
        project_out(w, harmonic_, mf);
        for (int i = 0; i <= j; ++i) {
          H(i, j) = inner(w, V[i], mf);
          axpy(w, -H(i, j), V[i]);
        }
        for (int i = 0; i <= j; ++i) {
          const cplx c2 = inner(w, V[i], mf);
          H(i, j) += c2;
          axpy(w, -c2, V[i]);
        }
        H(j + 1, j) = l2(w, mf);
        for (int i = 0; i < j; ++i) {
          const cplx t = std::conj(cs[i]) * H(i, j) + std::conj(sn[i]) * H(i + 1, j);
          H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
          H(i, j) = t;
        }
        const double a = std::abs(H(j, j)), bb = std::abs(H(j + 1, j));
        const double den = std::hypot(a, bb);
        if (den == 0.0) break;
        cs[j] = H(j, j) / den;
        sn[j] = H(j + 1, j) / den;
        H(j, j) = den;
        H(j + 1, j) = 0.0;
        g(j + 1) = -sn[j] * g(j);
        g(j) = std::conj(cs[j]) * g(j);
        ++total;
        rel = std::abs(g(j + 1)) / bn;
        history.push_back(rel);
        if (rel <= 0.1 * opt_.tolerance) {
          ++j;
          break;
        }
        GridSection vn = w;
        const double hn = l2(vn, mf);
        if (hn == 0.0) {
          ++j;
          break;
        }
        vn *= cplx(1.0 / hn);
        V.push_back(std::move(vn));
      }
      const int k = std::min(j, m);
      Eigen::VectorXcd y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
      GridSection z(omega.grid, omega.rank);
      for (int i = 0; i < k; ++i) axpy(z, y(i), V[i]);
      u += frozen_pinv(z);
      r = b - D_->apply(u);
      project_out(r, harmonic_, mf);
      rel = l2(r, mf) / bn;
    }
    project_out(u, kernel_, mf);
    const double final_rel = l2(D_->apply(u) - b, mf) / bn;
    history.push_back(final_rel);
    if (trace) {
      trace->spectral = false;
      trace->iterations = total;
      trace->residuals = history;
    }
    if (!(final_rel <= opt_.tolerance))
      throw Error(ErrorCode::NoConvergence, "GMRES stopped at relative residual " + std::to_string(final_rel), final_rel);
    return u;
  }

  const OperatorView* D_;
  SolverOptions opt_;
  std::vector<Eigen::MatrixXcd> svd_U_, svd_V_, pinv_;
  std::vector<Eigen::VectorXd> svd_S_;
  double thr_ = 0.0, frozen_norm_ = 0.0;
  HarmonicBasis harmonic_, kernel_;
};

inline HarmonicBasis harmonic_basis(const OperatorView& D) { return MinNormSolver(D).harmonic(); }
inline HarmonicBasis kernel_basis(const OperatorView& D) { return MinNormSolver(D).kernel(); }

inline GridSection min_norm_solve(const OperatorView& D, const GridSection& omega, SolveTrace* trace = nullptr)
{
  return MinNormSolver(D).solve(omega, trace);
}

// v with D* v = g, g orthogonal to ker D
inline GridSection adjoint_solve(const OperatorView& D, const GridSection& g, SolveTrace* trace = nullptr)
{
  AdjointView A(D);
  return MinNormSolver(A).solve(g, trace);
}

struct Decomposition {
  GridSection harmonic, u;
  double residual = 0.0;       // ||v - H(v) - D u|| / ||v||
  double orthogonality = 0.0;  // max_j |<v - H(v), e_j>|
};

// v = H(v) + D(u) with u the minimum-norm solution for v - H(v)
inline Decomposition direct_decomposition(const MinNormSolver& S, const GridSection& v)
{
  const MetricField& mf = S.op().metric();
  Decomposition d;
  d.harmonic = harmonic_projection(v, S.harmonic(), mf);
  GridSection rest = v - d.harmonic;
  d.orthogonality = max_coefficient(rest, S.harmonic(), mf);
  project_out(rest, S.harmonic(), mf);
  d.u = S.solve(rest);
  d.residual = l2(v - d.harmonic - S.op().apply(d.u), mf) / l2(v, mf);
  return d;
}

// ---------------------------------------------------------------- local series solver

struct SeriesStep {
  int k = 0;
  double h_norm = 0.0;
  double bound = 0.0;  // 4^{-k} ||h_0||
};

struct LocalSeriesResult {
  GridSection omega_prime, u;
  Domain ball;
  std::vector<SeriesStep> trace;
  double smallness = 0.0;  // max_j ||e_j 1_B||
  double smallness_limit = 0.0;
  double projection_residual = 0.0;  // ||P_h omega'|| / ||omega||
  double ball_residual = 0.0;        // ||(Du - omega) 1_B|| / ||omega 1_B||
  bool decay_ok = true;
  bool trivial = false;
};

inline LocalSeriesResult local_series_solve(const MinNormSolver& S, const GridSection& omega, std::size_t center,
                                            double radius)
{
  const OperatorView& D = S.op();
  const MetricField& mf = D.metric();
  const HarmonicBasis& H = S.harmonic();
  LocalSeriesResult res;
  res.ball = ball_domain(mf, center, radius);
  std::vector<char> inB(mf.grid.size(), 0);
  for (auto i : res.ball.nodes) inB[i] = 1;
  auto restrict_to = [&](const GridSection& v, bool inside) {
    GridSection w = v;
    for (std::size_t i = 0; i < w.nodes(); ++i)
      if (static_cast<bool>(inB[i]) != inside)
        for (int c = 0; c < w.rank; ++c) w.at(i, c) = 0.0;
    return w;
  };
  const std::size_t K = H.size();
  res.smallness_limit = K ? 1.0 / (4.0 * std::sqrt(static_cast<double>(K))) : INFINITY;
  for (const auto& e : H.e) res.smallness = std::max(res.smallness, l2(restrict_to(e, true), mf));
  if (res.smallness > res.smallness_limit)
    throw Error(ErrorCode::BallTooLarge, "max_j ||e_j 1_B|| = " + std::to_string(res.smallness), res.smallness);

  GridSection wB = restrict_to(omega, true);
  const double wn = l2(omega, mf);
  auto coeffs = [&](const GridSection& v) {
    Eigen::VectorXcd c(K);
    for (std::size_t j = 0; j < K; ++j) c(j) = inner(v, H.e[j], mf);
    return c;
  };
  Eigen::VectorXcd h = coeffs(wB);
  const double h0 = h.norm();
  res.omega_prime = wB;
  res.trace.push_back({0, h0, h0});
  if (h0 <= 1e-14 * std::max(wn, 1e-300)) {
    res.trivial = true;
  } else {
    for (int k = 0; k < 64 && h.norm() > 1e-10 * h0; ++k) {
      GridSection s(omega.grid, omega.rank);
      for (std::size_t j = 0; j < K; ++j) axpy(s, h(j), H.e[j]);
      GridSection wk = restrict_to(s, false);
      res.omega_prime -= wk;
      h -= coeffs(wk);
      SeriesStep st{k + 1, h.norm(), std::pow(4.0, -(k + 1)) * h0};
      if (st.h_norm > st.bound) res.decay_ok = false;
      res.trace.push_back(st);
    }
    if (h.norm() > 1e-10 * h0) throw Error(ErrorCode::NoConvergence, "series did not reach the stop level", h.norm());
  }
  res.projection_residual = wn > 0 ? max_coefficient(res.omega_prime, H, mf) * std::sqrt(std::max<double>(K, 1)) / wn : 0.0;
  if (res.projection_residual > 1e-9)
    throw Error(ErrorCode::NoConvergence, "extension is not orthogonal to the harmonic space", res.projection_residual);
  GridSection op = res.omega_prime;
  project_out(op, H, mf);
  res.u = S.solve(op);
  GridSection du = D.apply(res.u);
  const double bn = l2(wB, mf);
  res.ball_residual = bn > 0 ? l2(restrict_to(du - omega, true), mf) / bn : 0.0;
  return res;
}

}  // namespace lirlab
