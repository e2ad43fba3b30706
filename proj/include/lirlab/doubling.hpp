#pragma once

#include "lirlab/elliptic.hpp"

namespace lirlab {

// Flat cylinder N = S^1 x [0, L] extended by delta and doubled across both ends:
// Gamma = S^1 x (circle of circumference 2(L + delta)).
struct DoubledDomain {
  double L = 0.0, delta = 0.0;
  double circumference = 2 * pi;  // of the S^1 factor
  int J = 0;                      // N occupies y-indices 0..J on Gamma
  MetricField gamma;
  MetricField cylinder;
  std::vector<std::size_t> embed;  // cylinder node -> Gamma node
  std::vector<char> in_N;          // indicator of N on Gamma nodes
  double volume_N = 0.0, volume_rest = 0.0;
};

inline DoubledDomain build_double(double L, double delta, const std::vector<int>& grid, double circumference = 2 * pi)
{
  if (!(L > 0) || !(delta >= 0)) throw Error(ErrorCode::InvalidModel, "double needs L > 0 and delta >= 0");
  if (grid.size() != 2) throw Error(ErrorCode::InvalidModel, "double needs a 2-entry grid (Nx, Ny)");
  DoubledDomain dd;
  dd.L = L;
  dd.delta = delta;
  dd.circumference = circumference;
  const double P = 2 * (L + delta);
  const double h = P / grid[1];
  const double jl = L / h, jd = delta / h;
  if (std::abs(jl - std::round(jl)) > 1e-9 || std::abs(jd - std::round(jd)) > 1e-9)
    throw Error(ErrorCode::GridMisaligned, "boundary circles y = 0, L must lie on grid lines", jl);
  dd.J = static_cast<int>(std::round(jl));
  dd.gamma = build_metric(ManifoldModel::flat({circumference, P}), grid);
  dd.cylinder = build_metric(ManifoldModel::cylinder({circumference, 0.0}, L), {grid[0], dd.J + 1});
  const Grid& G = dd.gamma.grid;
  dd.in_N.assign(G.size(), 0);
  for (std::size_t i = 0; i < G.size(); ++i) {
    const int j = G.unravel(i)[1];
    dd.in_N[i] = j <= dd.J;
  }
  dd.embed.resize(dd.cylinder.grid.size());
  for (std::size_t i = 0; i < dd.embed.size(); ++i) dd.embed[i] = G.ravel(dd.cylinder.grid.unravel(i));
  for (std::size_t i = 0; i < G.size(); ++i) (dd.in_N[i] ? dd.volume_N : dd.volume_rest) += dd.gamma.volume_weight(i);
  if (!(dd.volume_rest > 0)) throw Error(ErrorCode::InvalidModel, "Gamma minus N has zero volume");
  return dd;
}

// omega on the cylinder grid, extended by zero to Gamma
inline GridSection lift_to_double(const DoubledDomain& dd, const GridSection& omega)
{
  GridSection w(dd.gamma.grid, omega.rank);
  for (std::size_t i = 0; i < dd.embed.size(); ++i)
    for (int c = 0; c < omega.rank; ++c) w.at(dd.embed[i], c) = omega.at(i, c);
  return w;
}

inline GridSection restrict_to_cylinder(const DoubledDomain& dd, const GridSection& u)
{
  GridSection v(dd.cylinder.grid, u.rank);
  for (std::size_t i = 0; i < dd.embed.size(); ++i)
    for (int c = 0; c < u.rank; ++c) v.at(i, c) = u.at(dd.embed[i], c);
  return v;
}

struct Extension {
  GridSection omega_prime;  // on Gamma
  Eigen::MatrixXcd gram;
  Eigen::VectorXcd lambda, mu;
  double gram_condition = 1.0;
  double orthogonality = 0.0;  // max_j |<omega', e_j>| / ||omega||
  bool restriction_exact = true;
};

inline Extension orthogonal_extension(const DoubledDomain& dd, const GridSection& omega, const HarmonicBasis& basis)
{
  const MetricField& mf = dd.gamma;
  Extension ex;
  GridSection wN = lift_to_double(dd, omega);
  const std::size_t K = basis.size();
  std::vector<GridSection> outside;
  for (const auto& e : basis.e) {
    GridSection o = e;
    for (std::size_t i = 0; i < o.nodes(); ++i)
      if (dd.in_N[i])
        for (int c = 0; c < o.rank; ++c) o.at(i, c) = 0.0;
    outside.push_back(std::move(o));
  }
  ex.gram.resize(K, K);
  ex.lambda.resize(K);
  for (std::size_t j = 0; j < K; ++j) {
    ex.lambda(j) = inner(wN, basis.e[j], mf);
    for (std::size_t k = 0; k < K; ++k) ex.gram(j, k) = inner(outside[k], outside[j], mf);
  }
  ex.omega_prime = wN;
  ex.mu = Eigen::VectorXcd::Zero(K);
  if (K > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(ex.gram);
    const auto& s = svd.singularValues();
    ex.gram_condition = s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : INFINITY;
    if (!(ex.gram_condition < 1e8))
      throw Error(ErrorCode::GramSingular, "Gram matrix of e_k 1_{Gamma\\N} is singular (no WMP witness)",
                  ex.gram_condition);
    ex.mu = ex.gram.partialPivLu().solve(ex.lambda);
    for (std::size_t k = 0; k < K; ++k) axpy(ex.omega_prime, -ex.mu(k), outside[k]);
  }
  const double wn = l2(wN, mf);
  ex.orthogonality = wn > 0 ? max_coefficient(ex.omega_prime, basis, mf) / wn : 0.0;
  if (ex.orthogonality > 1e-10)
    throw Error(ErrorCode::NotOrthogonal, "extension is not orthogonal to the harmonic basis", ex.orthogonality);
  for (std::size_t i = 0; i < dd.embed.size(); ++i)
    for (int c = 0; c < omega.rank; ++c)
      if (ex.omega_prime.at(dd.embed[i], c) != omega.at(i, c)) ex.restriction_exact = false;
  return ex;
}

namespace detail {

// D applied with spectral x-derivatives and 6th-order periodic finite differences in y,
// an independent discretization used to cross-check the spectral solve.
inline GridSection apply_fd_y(const EllipticOperator& D, const GridSection& u)
{
  const Grid& g = u.grid;
  const int ny = g.shape[1];
  const double h = g.spacing(1);
  auto fd = [&](const GridSection& v, int order) {
    std::vector<double> xs;
    for (int j = -3; j <= 3; ++j) xs.push_back(j * h);
    auto w = fornberg(0.0, xs, order);
    GridSection out(g, v.rank);
    for (std::size_t i = 0; i < v.nodes(); ++i) {
      auto c = g.unravel(i);
      for (int k = 0; k < 7; ++k) {
        auto cc = c;
        cc[1] = ((c[1] + k - 3) % ny + ny) % ny;
        const std::size_t src = g.ravel(cc);
        for (int r = 0; r < v.rank; ++r) out.at(i, r) += w[k] * v.at(src, r);
      }
    }
    return out;
  };
  GridSection out(g, u.rank);
  for (const auto& t : D.terms) {
    int nx = 0, nyo = 0;
    for (int a : t.axes) (a == 0 ? nx : nyo) += 1;
    GridSection d = partial(u, 0, nx);
    if (nyo) d = fd(d, nyo);
    for (std::size_t i = 0; i < d.nodes(); ++i) {
      Eigen::MatrixXcd A = D.coefficient(t, i);
      for (int r = 0; r < u.rank; ++r) {
        cplx s(0.0);
        for (int c = 0; c < u.rank; ++c) s += A(r, c) * d.at(i, c);
        out.at(i, r) += s;
      }
    }
  }
  return out;
}

}  // namespace detail

struct BoundaryReport {
  Extension extension;
  GridSection u;                    // on the cylinder grid
  double spectral_residual = 0.0;   // max over interior N nodes of |Du - omega| / ||omega||_inf
  double fd_residual = 0.0;         // same with the finite-difference operator, y in [L/4, 3L/4]
  double sobolev_ratio = 0.0;       // ||u||_{W^{m,r}(N)} / ||omega||_{L^r(N)}
  bool pass = false;
};

inline BoundaryReport boundary_solve(const DoubledDomain& dd, const MinNormSolver& S, const EllipticOperator& D,
                                     const GridSection& omega, double r, double tolerance = 1e-6)
{
  BoundaryReport rep;
  rep.extension = orthogonal_extension(dd, omega, S.harmonic());
  GridSection uG = S.solve(rep.extension.omega_prime);
  GridSection DuS = D.apply(uG);
  GridSection DuF = detail::apply_fd_y(D, uG);
  const Grid& G = dd.gamma.grid;
  double wmax = 0.0;
  for (std::size_t i = 0; i < omega.nodes(); ++i) wmax = std::max(wmax, omega.modulus(i));
  const double hy = G.spacing(1);
  for (std::size_t i = 0; i < G.size(); ++i) {
    const int j = G.unravel(i)[1];
    if (j <= 0 || j >= dd.J) continue;
    double es = 0.0, ef = 0.0;
    for (int c = 0; c < omega.rank; ++c) {
      es += std::norm(DuS.at(i, c) - rep.extension.omega_prime.at(i, c));
      ef += std::norm(DuF.at(i, c) - rep.extension.omega_prime.at(i, c));
    }
    rep.spectral_residual = std::max(rep.spectral_residual, std::sqrt(es));
    const double y = j * hy;
    if (y >= 0.25 * dd.L - 1e-12 && y <= 0.75 * dd.L + 1e-12) rep.fd_residual = std::max(rep.fd_residual, std::sqrt(ef));
  }
  if (wmax > 0) {
    rep.spectral_residual /= wmax;
    rep.fd_residual /= wmax;
  }
  rep.u = restrict_to_cylinder(dd, uG);
  const double wl = lp_norm(omega, dd.cylinder, Domain::all(), r).value;
  rep.sobolev_ratio = wl > 0 ? sobolev_norm(rep.u, dd.cylinder, D.order, r).value / wl : 0.0;
  rep.pass = rep.extension.restriction_exact && rep.spectral_residual <= tolerance;
  return rep;
}

}  // namespace lirlab
