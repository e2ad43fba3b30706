#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "lirlab/geometry.hpp"

using namespace lirlab;

namespace {

// All-pairs shortest paths with independently coded edge lengths (king-move stencil,
// sqrt(rho) at the edge midpoint times the Euclidean step).
std::vector<double> floyd_warshall(const MetricField& mf)
{
  const Grid& g = mf.grid;
  const std::size_t N = g.size();
  const int n = g.dim();
  std::vector<double> d(N * N, INFINITY);
  for (std::size_t i = 0; i < N; ++i) d[i * N + i] = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    auto c = g.unravel(i);
    const int K = static_cast<int>(std::pow(3, n));
    for (int code = 0; code < K; ++code) {
      int t = code;
      std::vector<int> off(n), nb(n);
      bool zero = true, ok = true;
      for (int a = n - 1; a >= 0; --a) {
        off[a] = t % 3 - 1;
        t /= 3;
        if (off[a]) zero = false;
      }
      if (zero) continue;
      double step2 = 0.0;
      double mid[3];
      for (int a = 0; a < n; ++a) {
        int q = c[a] + off[a];
        if (g.periodic[a])
          q = (q + g.shape[a]) % g.shape[a];
        else if (q < 0 || q >= g.shape[a])
          ok = false;
        nb[a] = q;
        step2 += std::pow(off[a] * g.spacing(a), 2);
        mid[a] = (c[a] + 0.5 * off[a]) * g.spacing(a);
      }
      if (!ok) continue;
      const double len = std::sqrt(mf.model.conformal_factor(mid)) * std::sqrt(step2);
      const std::size_t j = g.ravel(nb);
      d[i * N + j] = std::min(d[i * N + j], len);
    }
  }
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) d[i * N + j] = std::min(d[i * N + j], d[i * N + k] + d[k * N + j]);
  return d;
}

double octile(double dx, double dy, double h)
{
  const double a = std::max(dx, dy) / h, b = std::min(dx, dy) / h;
  return (b * std::sqrt(2.0) + (a - b)) * h;
}

}  // namespace

TEST(Metric, FlatTorusIsEuclidean)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {16, 16});
  for (std::size_t i = 0; i < mf.grid.size(); i += 7) {
    EXPECT_DOUBLE_EQ(mf.gij(i, 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(mf.gij(i, 0, 1), 0.0);
    EXPECT_DOUBLE_EQ(mf.sqrt_det[i], 1.0);
  }
  EXPECT_NEAR(mf.total_volume(), 4 * pi * pi, 1e-12);
}

TEST(Metric, BumpyTorusConformalClosedForm)
{
  const double a = 0.3;
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, a, {1, 2}), {16, 16});
  for (std::size_t i = 0; i < mf.grid.size(); i += 5) {
    auto x = mf.grid.coords(i);
    const double ph = x[0] + 2 * x[1];
    const double rho = 1 + a * std::sin(ph);
    EXPECT_NEAR(mf.gij(i, 1, 1), rho, 1e-14);
    EXPECT_NEAR(mf.ginv_ij(i, 0, 0), 1 / rho, 1e-14);
    EXPECT_NEAR(mf.sqrt_det[i], rho, 1e-14);
    EXPECT_NEAR(mf.dgij(i, 1, 0, 0), 2 * a * std::cos(ph), 1e-13);
    EXPECT_NEAR(mf.dgij(i, 0, 1, 1), a * std::cos(ph), 1e-13);
  }
}

TEST(Metric, CylinderHasOneNonPeriodicAxis)
{
  auto mf = build_metric(ManifoldModel::cylinder({2 * pi, 0.0}, pi), {16, 9});
  EXPECT_TRUE(mf.grid.periodic[0]);
  EXPECT_FALSE(mf.grid.periodic[1]);
  EXPECT_NEAR(mf.grid.spacing(1), pi / 8, 1e-15);
  EXPECT_NEAR(mf.total_volume(), 2 * pi * pi, 1e-12);
}

TEST(Metric, RejectsBadModels)
{
  EXPECT_THROW(build_metric(ManifoldModel::flat({2 * pi}), {2}), Error);
  EXPECT_THROW(build_metric(ManifoldModel::bumpy({2 * pi}, 1.5, {1}), {16}), Error);
  EXPECT_THROW(build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {16}), Error);
}

TEST(Distance, FlatTorusMatchesOctileMetric)
{
  const int N = 20;
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {N, N});
  const double h = mf.grid.spacing(0);
  DistanceEngine eng(mf);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, mf.grid.size() - 1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t x = pick(rng), y = pick(rng);
    auto cx = mf.grid.unravel(x), cy = mf.grid.unravel(y);
    int dx = std::abs(cx[0] - cy[0]), dy = std::abs(cx[1] - cy[1]);
    dx = std::min(dx, N - dx);
    dy = std::min(dy, N - dy);
    EXPECT_NEAR(eng.distance(x, y), octile(dx * h, dy * h, h), 1e-12);
  }
}

TEST(Distance, BumpyLineMatchesArcLength)
{
  const double a = 0.4;
  const int N = 512;
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi}, a, {1}), {N});
  DistanceEngine eng(mf);
  // Simpson's rule on integral_0^X sqrt(1 + a sin x) dx
  auto arclen = [&](double X) {
    const int M = 2000;
    const double h = X / M;
    double s = 0.0;
    for (int i = 0; i <= M; ++i) {
      const double w = (i == 0 || i == M) ? 1 : (i % 2 ? 4 : 2);
      s += w * std::sqrt(1 + a * std::sin(i * h));
    }
    return s * h / 3;
  };
  for (int k : {5, 40, 128, 200}) {
    const double X = k * mf.grid.spacing(0);
    EXPECT_NEAR(eng.distance(0, k), arclen(X), 2e-5) << k;
  }
}

TEST(Distance, AgreesWithFloydWarshall)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.35, {1, 1}), {9, 10});
  auto D = floyd_warshall(mf);
  DistanceEngine eng(mf);
  const std::size_t N = mf.grid.size();
  for (std::size_t i = 0; i < N; i += 3)
    for (std::size_t j = 0; j < N; ++j) ASSERT_NEAR(eng.distance(i, j), D[i * N + j], 1e-12);
}

TEST(Distance, NonPeriodicAxisDoesNotWrap)
{
  auto mf = build_metric(ManifoldModel::cylinder({2 * pi, 0.0}, 1.0), {8, 11});
  DistanceEngine eng(mf);
  const std::size_t a = mf.grid.ravel({0, 0}), b = mf.grid.ravel({0, 10});
  EXPECT_NEAR(eng.distance(a, b), 1.0, 1e-12);
}

TEST(DistanceProperties, SymmetryAndTriangleInequality)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.3, {1, 1}), {24, 24});
  DistanceEngine eng(mf);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, mf.grid.size() - 1);
  for (int t = 0; t < 60; ++t) {
    const std::size_t x = pick(rng), y = pick(rng), z = pick(rng);
    const double dxy = eng.distance(x, y), dyx = eng.distance(y, x);
    EXPECT_NEAR(dxy, dyx, 1e-12);
    EXPECT_LE(eng.distance(x, z), dxy + eng.distance(y, z) + 1e-12);
  }
}

TEST(Distance, BallAndWithinAreConsistent)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.3, {1, 1}), {24, 24});
  DistanceEngine eng(mf);
  auto ball = eng.ball(17, 1.0);
  for (auto [v, d] : ball) {
    EXPECT_LE(d, 1.0 + 1e-12);
    EXPECT_NEAR(eng.distance(17, v), d, 1e-12);
  }
  std::size_t inside = 0;
  for (std::size_t v = 0; v < mf.grid.size(); ++v)
    if (eng.distance(17, v) <= 1.0) ++inside;
  EXPECT_EQ(inside, ball.size());
}

TEST(AdmissibleRadius, FlatTorusIsCapped)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {16, 16});
  EXPECT_DOUBLE_EQ(admissible_radius(mf, 3, 0.1, 2), 1.0);
  auto small = build_metric(ManifoldModel::flat({1.0, 1.0}), {16, 16});
  EXPECT_DOUBLE_EQ(admissible_radius(small, 3, 0.1, 2), 0.5);
}

TEST(AdmissibleRadius, ConditionsHoldInsideAndFailJustOutside)
{
  // rho = 1 + a sin(x_0), m = 3: every center passes (a sqrt 2 <= eps) but the torus does not (2a > eps)
  const double a = 0.06, eps = 0.1;
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, a, {1, 0}), {32, 32});
  auto field = radius_field(mf, eps, 3);
  const double h = mf.grid.spacing(0);
  // |rho - 1| <= eps and sup|d rho| + sup|d^2 rho| <= eps on B(x, R), by dense sampling along x_0.
  // The sampled radius resolves the ball on a lattice of step h, so it is exact to within h.
  auto conditions = [&](double x0, double R) {
    double dev = 0, s1 = 0, s2 = 0;
    const int M = 4000;
    for (int t = 0; t <= M; ++t) {
      const double y = x0 - R + 2 * R * t / M;
      dev = std::max(dev, std::abs(a * std::sin(y)));
      s1 = std::max(s1, std::abs(a * std::cos(y)));
      s2 = std::max(s2, std::abs(a * std::sin(y)));
    }
    return dev <= eps && s1 + s2 <= eps;
  };
  int total = 0, capped = 0, interior = 0, maximal = 0;
  double lo = 1, hi = 0;
  for (std::size_t i = 0; i < mf.grid.size(); i += 3) {
    const double R = field.values[i];
    const double x0 = mf.grid.coords(i)[0];
    ASSERT_GT(R, 0.0);
    ASSERT_LE(R, 1.0);
    lo = std::min(lo, R);
    hi = std::max(hi, R);
    ++total;
    if (R >= 1.0) ++capped;
    if (conditions(x0, R - 1.01 * h)) ++interior;
    if (R < 1.0 && !conditions(x0, R + 0.01 * h)) ++maximal;
  }
  EXPECT_EQ(interior, total);
  EXPECT_EQ(maximal, total - capped);
  EXPECT_LT(lo, 0.5 * hi);
}

TEST(AdmissibleRadius, FailingCenterIsNotAdmissible)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi}, 0.5, {1}), {64});
  const std::size_t node = 16;  // x = pi/2, rho = 1.5
  try {
    admissible_radius(mf, node, 0.1, 2);
    FAIL() << "expected NotAdmissible";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotAdmissible);
  }
}

TEST(Comparability, ExhaustiveOnComputedField)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.06, {1, 0}), {24, 24});
  auto field = radius_field(mf, 0.1, 3);
  auto D = floyd_warshall(mf);
  const std::size_t N = mf.grid.size();
  std::size_t premise = 0, violations = 0;
  for (std::size_t x = 0; x < N; ++x)
    for (std::size_t y = 0; y < N; ++y) {
      const double Rx = field.values[x], Ry = field.values[y];
      if (D[x * N + y] <= 0.25 * (Rx + Ry)) {
        ++premise;
        if (Rx > 4 * Ry) ++violations;
      }
    }
  EXPECT_GT(premise, 2 * N);
  EXPECT_EQ(violations, 0u);
  auto rep = comparability_check(field, mf, 10000, 1);
  EXPECT_EQ(rep.pairs, 10000u);
  EXPECT_GT(rep.premise_hits, 0u);
  EXPECT_TRUE(rep.pass());
}

TEST(Comparability, DetectsAnAbruptJump)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {64, 64});
  AdmissibleRadiusField f;
  f.values.assign(mf.grid.size(), 1.0);
  for (std::size_t i = 0; i < f.values.size(); ++i)
    if (mf.grid.coords(i)[0] >= pi) f.values[i] = 0.1;
  auto rep = comparability_check(f, mf, 10000, 2);
  EXPECT_FALSE(rep.pass());
}

TEST(InjectedRadius, AcceptsTwoScaleAndRejectsBadFields)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {64, 64});
  std::vector<double> two(mf.grid.size(), 1.0);
  for (std::size_t i = 0; i < two.size(); ++i)
    if (mf.grid.coords(i)[0] >= pi) two[i] = 0.5;
  auto f = inject_radius_field(mf, two, 0.1, 2);
  EXPECT_EQ(f.provenance, RadiusProvenance::injected);

  auto code_of = [&](std::vector<double> v) {
    try {
      inject_radius_field(mf, std::move(v), 0.1, 2);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IOError;
  };
  std::vector<double> jump(two);
  for (double& v : jump)
    if (v < 1.0) v = 0.1;
  EXPECT_EQ(code_of(jump), ErrorCode::InjectionRejected);
  std::vector<double> big(mf.grid.size(), 1.5);
  EXPECT_EQ(code_of(big), ErrorCode::InjectionRejected);
  EXPECT_EQ(code_of(std::vector<double>(3, 1.0)), ErrorCode::InjectionRejected);
}

TEST(RadiusCsv, RoundTrip)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.06, {1, 0}), {8, 8});
  auto f = radius_field(mf, 0.1, 3);
  const auto path = (std::filesystem::temp_directory_path() / "lirlab_radius_roundtrip.csv").string();
  write_radius_csv(path, f, mf.grid);
  auto back = read_radius_csv(path);
  ASSERT_EQ(back.size(), f.values.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_DOUBLE_EQ(back[i], f.values[i]);
  EXPECT_THROW(read_radius_csv("/nonexistent/dir/r.csv"), Error);
}

TEST(MultiIndices, CountsAreBinomial)
{
  auto binom = [](int a, int b) {
    double r = 1;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return static_cast<std::size_t>(std::lround(r));
  };
  for (int n = 1; n <= 3; ++n)
    for (int j = 0; j <= 4; ++j) EXPECT_EQ(multi_indices(n, j, j).size(), binom(n + j - 1, j));
  EXPECT_TRUE(multi_indices(2, 1, 0).empty());
}
