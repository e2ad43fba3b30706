#include <gtest/gtest.h>

#include <filesystem>

#include "lirlab/fields.hpp"

using namespace lirlab;

namespace {

MetricField flat_line(int N) { return build_metric(ManifoldModel::flat({2 * pi}), {N}); }

}  // namespace

TEST(Quadrature, ConstantHasVolumeNorm)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.3, {1, 1}), {32, 32});
  auto one = sample_scalar(mf.grid, [](const std::vector<double>&) { return cplx(1.0); });
  EXPECT_NEAR(std::pow(l2(one, mf), 2), mf.total_volume(), 1e-10);
  // the trapezoid rule is exact for a band-limited density: int (1 + a sin) = 4 pi^2
  EXPECT_NEAR(mf.total_volume(), 4 * pi * pi, 1e-10);
}

TEST(Quadrature, LebesgueNormsOfSine)
{
  auto mf = flat_line(64);
  auto u = sample_scalar(mf.grid, [](const std::vector<double>& x) { return cplx(std::sin(x[0])); });
  EXPECT_NEAR(lp_norm(u, mf, Domain::all(), 2).value, std::sqrt(pi), 1e-12);
  EXPECT_NEAR(lp_norm(u, mf, Domain::all(), 4).value, std::pow(3 * pi / 4, 0.25), 1e-12);
  EXPECT_NEAR(lp_norm(u, mf, Domain::all(), INFINITY).value, 1.0, 1e-12);
  std::vector<double> w(mf.grid.size(), 4.0);
  EXPECT_NEAR(lp_norm(u, mf, Domain::all(), 2, &w).value, 2 * std::sqrt(pi), 1e-12);
}

TEST(Quadrature, InnerProductIsHermitian)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.2, {1, 0}), {16, 16});
  auto a = band_limited_section(mf.grid, 2, 1);
  auto b = band_limited_section(mf.grid, 2, 2);
  const cplx ab = inner(a, b, mf), ba = inner(b, a, mf);
  EXPECT_NEAR(std::abs(ab - std::conj(ba)), 0.0, 1e-10);
  EXPECT_NEAR(inner(a, a, mf).imag(), 0.0, 1e-10);
}

TEST(Derivatives, SpectralPartialsOfTrigPolynomial)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {32, 32});
  auto u = sample_scalar(mf.grid, [](const std::vector<double>& x) { return cplx(std::sin(3 * x[0]) * std::cos(2 * x[1])); });
  auto ux = partial(u, 0);
  auto uxy = partial(u, std::vector<int>{1, 1});
  auto uyy = partial(u, 1, 2);
  double e = 0;
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    auto x = mf.grid.coords(i);
    e = std::max(e, std::abs(ux.at(i, 0) - 3 * std::cos(3 * x[0]) * std::cos(2 * x[1])));
    e = std::max(e, std::abs(uxy.at(i, 0) + 6 * std::cos(3 * x[0]) * std::sin(2 * x[1])));
    e = std::max(e, std::abs(uyy.at(i, 0) + 4 * std::sin(3 * x[0]) * std::cos(2 * x[1])));
  }
  EXPECT_LT(e, 1e-11);
}

TEST(Derivatives, FiniteDifferencesExactOnPolynomials)
{
  auto mf = build_metric(ManifoldModel::cylinder({2 * pi, 0.0}, 2.0), {8, 21});
  auto u = sample_scalar(mf.grid, [](const std::vector<double>& x) { return cplx(std::pow(x[1], 5) - 2 * x[1]); });
  auto d1 = partial(u, 1, 1), d2 = partial(u, 1, 2);
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    const double y = mf.grid.coords(i)[1];
    EXPECT_NEAR(d1.at(i, 0).real(), 5 * std::pow(y, 4) - 2, 1e-8);
    EXPECT_NEAR(d2.at(i, 0).real(), 20 * std::pow(y, 3), 1e-7);
  }
}

TEST(Derivatives, FornbergThreePointWeights)
{
  const double h = 0.1;
  auto w = detail::fornberg(0.0, {-h, 0.0, h}, 2);
  EXPECT_NEAR(w[0], 1 / (h * h), 1e-9);
  EXPECT_NEAR(w[1], -2 / (h * h), 1e-9);
  EXPECT_NEAR(w[2], 1 / (h * h), 1e-9);
  auto d = detail::fornberg(0.0, {-h, 0.0, h}, 1);
  EXPECT_NEAR(d[0], -0.5 / h, 1e-12);
  EXPECT_NEAR(d[1], 0.0, 1e-12);
}

TEST(Derivatives, ChristoffelMatchesConformalClosedForm)
{
  // Gamma^k_ij = (d_j rho delta_ik + d_i rho delta_jk - d_k rho delta_ij) / (2 rho)
  const double a = 0.25;
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, a, {1, 2}), {16, 16});
  auto ch = christoffel(mf);
  const double kv[2] = {1, 2};
  for (std::size_t node = 0; node < mf.grid.size(); node += 11) {
    auto x = mf.grid.coords(node);
    const double ph = x[0] + 2 * x[1];
    const double rho = 1 + a * std::sin(ph);
    double drho[2];
    for (int c = 0; c < 2; ++c) drho[c] = a * kv[c] * std::cos(ph);
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const double ex = ((i == k) * drho[j] + (j == k) * drho[i] - (i == j) * drho[k]) / (2 * rho);
          EXPECT_NEAR(ch.at(node, k, i, j), ex, 1e-12);
        }
  }
}

TEST(Derivatives, CovariantHessianOnBumpyTorus)
{
  const double a = 0.25;
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, a, {1, 0}), {32, 32});
  // u = sin(y) and rho depends on x only: Gamma^y_xx = Gamma^y_yy = 0, Gamma^y_xy = d_x rho / (2 rho)
  auto u = sample_scalar(mf.grid, [](const std::vector<double>& x) { return cplx(std::sin(x[1])); });
  auto cd = covariant_derivatives(u, mf, 2);
  for (std::size_t node = 0; node < mf.grid.size(); node += 13) {
    auto x = mf.grid.coords(node);
    const double rho = 1 + a * std::sin(x[0]);
    const double dxr = a * std::cos(x[0]);
    const double uy = std::cos(x[1]), uyy = -std::sin(x[1]);
    const cplx* H = &cd.hess[node * 4];
    EXPECT_NEAR(H[0].real(), 0.0, 1e-11);                       // xx: -Gamma^y_xx u_y
    EXPECT_NEAR(H[1].real(), -dxr / (2 * rho) * uy, 1e-11);     // xy: -Gamma^y_xy u_y
    EXPECT_NEAR(H[3].real(), uyy, 1e-11);                       // yy: u_yy - Gamma^y_yy u_y
    EXPECT_NEAR(H[1].real(), H[2].real(), 1e-15);
  }
  auto gm = gradient_modulus(cd, mf);
  for (std::size_t node = 0; node < mf.grid.size(); node += 17) {
    auto x = mf.grid.coords(node);
    EXPECT_NEAR(gm[node], std::abs(std::cos(x[1])) / std::sqrt(1 + a * std::sin(x[0])), 1e-11);
  }
}

TEST(Sobolev, NormOfCosine)
{
  auto mf = flat_line(64);
  for (int k : {1, 2, 5}) {
    auto u = sample_scalar(mf.grid, [k](const std::vector<double>& x) { return cplx(std::cos(k * x[0])); });
    auto rep = sobolev_norm(u, mf, 1, 2.0);
    ASSERT_EQ(rep.parts.size(), 2u);
    EXPECT_NEAR(rep.value, std::sqrt(pi) * (1 + k), 1e-10);
    auto rep2 = sobolev_norm(u, mf, 2, 2.0);
    EXPECT_NEAR(rep2.value, std::sqrt(pi) * (1 + k + k * k), 1e-9);
    auto rep3 = sobolev_norm(u, mf, 3, 2.0);
    EXPECT_NEAR(rep3.parts[3], std::sqrt(pi) * k * k * k, 1e-8);
  }
}

TEST(Sobolev, RefinementReportsQuadratureChange)
{
  auto rep = with_refinement([](int level) {
    auto mf = flat_line(level == 0 ? 16 : 32);
    auto u = sample_scalar(mf.grid, [](const std::vector<double>& x) { return cplx(std::exp(std::sin(x[0]))); });
    return lp_norm(u, mf, Domain::all(), 3.0);
  });
  EXPECT_EQ(rep.resolution, 32u);
  EXPECT_LT(rep.quadrature_error, 1e-10);
}

TEST(Holder, SharpFormAlwaysHolds)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.2, {1, 1}), {32, 32});
  for (std::uint64_t s = 1; s <= 5; ++s) {
    auto u = band_limited_section(mf.grid, 1, s);
    auto h = ball_holder_check(u, mf, 100 + 7 * s, 0.8, 2.0, 6.0);
    EXPECT_TRUE(h.sharp_holds);
    EXPECT_GE(h.slack, 1.0 - 1e-12);
    EXPECT_GT(h.ball_volume, 0.0);
    EXPECT_NEAR(h.scaled_ratio, std::pow(0.8 / h.ball_volume, 1.0 / 3), 1e-12);
  }
  auto u = band_limited_section(mf.grid, 1, 3);
  EXPECT_THROW(ball_holder_check(u, mf, 0, 0.5, 4.0, 2.0), Error);
}

TEST(Scaling, ConstantIsExactForUnitFunction)
{
  // v = 1: C(R) = |B_R|^{1/t - 1/r} R^m = pi^{-1/2} for n = 2, m = 1, r = 3/2, t = 6
  std::vector<std::function<double(const double*)>> fam{[](const double*) { return 1.0; }};
  auto rep = scaling_check(fam, 2, {1.0, 0.5, 0.25, 0.125}, 1, 1.5, 6.0);
  EXPECT_TRUE(rep.identities_ok);
  for (double c : rep.C) EXPECT_NEAR(c, 1 / std::sqrt(pi), 5e-3);
  EXPECT_LT(rep.spread, 0.01);
  EXPECT_NEAR(rep.slope, 0.0, 0.01);
}

TEST(Scaling, SmoothFamilyHasRadiusIndependentConstant)
{
  std::vector<std::function<double(const double*)>> fam{
      [](const double* y) { return std::exp(-2 * (y[0] * y[0] + y[1] * y[1])); },
      [](const double* y) { return std::cos(3 * y[0]) + 0.5 * y[1]; },
      [](const double* y) { return 1 - y[0] * y[0] - y[1] * y[1]; },
  };
  auto rep = scaling_check(fam, 2, {1.0, 0.5, 0.25, 0.125}, 1, 1.5, 6.0);
  EXPECT_TRUE(rep.identities_ok);
  EXPECT_TRUE(rep.lemma_ok);
  EXPECT_GE(rep.lemma_min_slack, 1.0 - 1e-12);
  EXPECT_TRUE(rep.constant_ok);
  EXPECT_LE(rep.spread, 0.05);
  ASSERT_EQ(rep.rows.size(), 3u * 4u * 2u);
  for (const auto& row : rep.rows) EXPECT_TRUE(row.ok) << row.R << " " << row.order;
}

TEST(Scaling, ExtraDimensionsScaleByPowerOfRadius)
{
  std::vector<std::function<double(const double*)>> fam{[](const double* y) { return std::sin(y[0] + 2 * y[1] - y[2]); }};
  auto rep = scaling_check(fam, 3, {1.0, 0.5}, 1, 2.0, 6.0, 1.0 / 24);
  EXPECT_TRUE(rep.identities_ok);
}

TEST(SobolevComparison, OneDimensionalBumpyLine)
{
  const double a = 0.05;
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi}, a, {1}), {512});
  auto u = sample_scalar(mf.grid, [](const std::vector<double>& x) { return cplx(std::cos(x[0]) + 0.3 * std::sin(2 * x[0])); });
  auto sc = sobolev_comparison(u, mf, 100, 0.8, 1, 2.0, 0.1);
  EXPECT_TRUE(sc.inner_containment);
  EXPECT_TRUE(sc.outer_containment);
  EXPECT_GT(sc.metric_norm, 0.0);
  EXPECT_NEAR(sc.ratio, 1.0, 2 * 0.1);
  auto flat = build_metric(ManifoldModel::flat({2 * pi}), {512});
  auto same = sobolev_comparison(u, flat, 100, 0.8, 1, 2.0, 0.1);
  EXPECT_NEAR(same.ratio, 1.0, 1e-12);
}

TEST(BandLimited, SeededAndMeanFree)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {16, 16});
  auto a = band_limited_section(mf.grid, 2, 42), b = band_limited_section(mf.grid, 2, 42);
  auto c = band_limited_section(mf.grid, 2, 43);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  cplx mean(0.0);
  for (std::size_t i = 0; i < a.nodes(); ++i) mean += a.at(i, 0);
  EXPECT_NEAR(std::abs(mean) / a.nodes(), 0.0, 1e-12);
  EXPECT_GT(l2(a, mf), 0.0);
}

TEST(SectionCsv, RoundTrip)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {8, 6});
  auto u = band_limited_section(mf.grid, 2, 7);
  const auto path = (std::filesystem::temp_directory_path() / "lirlab_section.csv").string();
  write_section_csv(path, u);
  auto v = read_section_csv(path, mf.grid, 2);
  for (std::size_t i = 0; i < u.values.size(); ++i) EXPECT_EQ(u.values[i], v.values[i]);
  EXPECT_THROW(read_section_csv(path, mf.grid, 1), Error);
  EXPECT_THROW(read_section_csv("/nonexistent/s.csv", mf.grid, 1), Error);
}
