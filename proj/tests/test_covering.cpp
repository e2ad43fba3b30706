#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "lirlab/covering.hpp"

using namespace lirlab;

namespace {

// Shortest-path length on the flat king-move lattice with periodic wrap.
double octile(const Grid& g, std::size_t x, std::size_t y)
{
  auto a = g.unravel(x), b = g.unravel(y);
  std::vector<double> d(g.dim());
  for (int k = 0; k < g.dim(); ++k) {
    int s = std::abs(a[k] - b[k]);
    s = std::min(s, g.shape[k] - s);
    d[k] = s * g.spacing(k);
  }
  const double hi = std::max(d[0], d[1]), lo = std::min(d[0], d[1]);
  return lo * std::sqrt(2.0) + (hi - lo);
}

// Smooth radius field on a tiny torus so that seed balls span many nodes.
struct TinyTorus {
  MetricField mf;
  AdmissibleRadiusField field;
  TinyTorus() : mf(build_metric(ManifoldModel::flat({0.05, 0.05}), {48, 48}))
  {
    std::vector<double> R(mf.grid.size());
    for (std::size_t i = 0; i < R.size(); ++i) {
      auto x = mf.grid.coords(i);
      R[i] = 0.6 + 0.3 * std::sin(2 * pi * x[0] / 0.05) * std::cos(2 * pi * x[1] / 0.05);
    }
    field = inject_radius_field(mf, R, 0.1, 2);
  }
};

}  // namespace

TEST(OverlapBound, ClosedFormValues)
{
  EXPECT_NEAR(overlap_bound(0.1, 2), 17600.0, 1e-9);
  EXPECT_NEAR(overlap_bound(0.1, 1), std::sqrt(11.0 / 9.0) * 120.0, 1e-12);
  EXPECT_NEAR(overlap_bound(0.5, 3), std::pow(3.0, 1.5) * 1728000.0, 1e-6);
}

TEST(Cover, FlatTorusIsSingletonsAndPassesAudit)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {64, 64});
  auto field = radius_field(mf, 0.1, 2);
  auto cover = build_cover(field, mf);
  EXPECT_EQ(cover.balls.size(), mf.grid.size());
  EXPECT_EQ(cover.max_overlap, 1);
  EXPECT_NEAR(cover.bound, 17600.0, 1e-9);
  auto audit = audit_cover(cover, field, mf);
  EXPECT_TRUE(audit.disjoint && audit.vitali && audit.covered);
  EXPECT_EQ(audit.checked, mf.grid.size());
}

TEST(Cover, TinyTorusMatchesIndependentGreedy)
{
  TinyTorus t;
  const Grid& g = t.mf.grid;
  const std::size_t N = g.size();
  auto cover = build_cover(t.field, t.mf);
  ASSERT_GT(cover.balls.size(), 1u);
  ASSERT_LT(cover.balls.size(), N / 10);

  std::vector<double> s(N);
  for (std::size_t i = 0; i < N; ++i) s[i] = t.field.values[i] / 120.0;
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  std::vector<std::size_t> chosen;
  for (std::size_t x : order) {
    bool free = true;
    for (std::size_t c : chosen)
      if (octile(g, x, c) <= s[x] + s[c] + 1e-12) {
        free = false;
        break;
      }
    if (free) chosen.push_back(x);
  }
  ASSERT_EQ(cover.balls.size(), chosen.size());
  for (std::size_t j = 0; j < chosen.size(); ++j) EXPECT_EQ(cover.balls[j].center, chosen[j]);
}

TEST(Cover, TinyTorusBruteForceProperties)
{
  TinyTorus t;
  const Grid& g = t.mf.grid;
  const std::size_t N = g.size();
  auto cover = build_cover(t.field, t.mf);
  const auto& B = cover.balls;

  // pairwise disjoint seed balls
  for (std::size_t i = 0; i < B.size(); ++i)
    for (std::size_t j = i + 1; j < B.size(); ++j)
      ASSERT_GT(octile(g, B[i].center, B[j].center), B[i].seed_radius + B[j].seed_radius - 1e-12);

  // Vitali containment and exact overlap counts
  std::vector<int> count(N, 0);
  for (std::size_t x = 0; x < N; ++x) {
    const double sx = t.field.values[x] / 120.0;
    bool ok = false;
    for (const auto& b : B) {
      const double d = octile(g, x, b.center);
      if (d <= b.inflated_radius + 1e-12) ++count[x];
      if (b.seed_radius >= sx && d <= sx + b.seed_radius + 1e-12 && d + sx <= b.inflated_radius + 1e-12) ok = true;
    }
    ASSERT_TRUE(ok) << x;
    ASSERT_GE(count[x], 1);
    ASSERT_EQ(cover.overlap[x], count[x]) << x;
  }
  const int mx = *std::max_element(count.begin(), count.end());
  EXPECT_EQ(cover.max_overlap, mx);
  EXPECT_GT(mx, 1);
  EXPECT_LE(mx, cover.bound);

  auto audit = audit_cover(cover, t.field, t.mf);
  EXPECT_TRUE(audit.disjoint && audit.vitali && audit.covered);

  auto st = overlap_stats(cover, t.mf);
  EXPECT_EQ(st.max, mx);
  EXPECT_TRUE(st.pass);
  EXPECT_TRUE(st.integral_pass);
  EXPECT_GT(st.integral_lhs, 0.0);
}

TEST(Cover, AuditDetectsBrokenCovers)
{
  TinyTorus t;
  auto cover = build_cover(t.field, t.mf);
  auto broken = cover;
  broken.balls.push_back(broken.balls.front());
  broken.balls.back().center = (broken.balls.front().center + 1) % t.mf.grid.size();
  broken.balls.back().index = static_cast<int>(broken.balls.size()) - 1;
  EXPECT_FALSE(audit_cover(broken, t.field, t.mf).disjoint);

  auto orphan = cover;
  orphan.witness[5] = -1;
  EXPECT_FALSE(audit_cover(orphan, t.field, t.mf).vitali);
}

TEST(Cover, BumpyComputedFieldPassesAudit)
{
  auto mf = build_metric(ManifoldModel::bumpy({2 * pi, 2 * pi}, 0.06, {1, 0}), {32, 32});
  auto field = radius_field(mf, 0.1, 3);
  auto cover = build_cover(field, mf);
  auto audit = audit_cover(cover, field, mf);
  EXPECT_TRUE(audit.disjoint && audit.vitali && audit.covered);
  EXPECT_LE(cover.max_overlap, cover.bound);
}

TEST(Cover, RejectsInvalidFields)
{
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi}), {8, 8});
  AdmissibleRadiusField bad;
  bad.epsilon = 0.1;
  bad.values.assign(10, 1.0);
  auto code = [&] {
    try {
      build_cover(bad, mf);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IOError;
  };
  EXPECT_EQ(code(), ErrorCode::CoverIncomplete);
  bad.values.assign(mf.grid.size(), 1.0);
  bad.values[3] = 0.0;
  EXPECT_EQ(code(), ErrorCode::CoverIncomplete);
}

TEST(Cover, CsvHasOneRowPerBall)
{
  TinyTorus t;
  auto cover = build_cover(t.field, t.mf);
  const auto path = (std::filesystem::temp_directory_path() / "lirlab_cover.csv").string();
  write_cover_csv(path, cover, t.mf.grid);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "index,c0,c1,seed_radius,inflated_radius");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, cover.balls.size());
}
