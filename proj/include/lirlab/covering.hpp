#pragma once

#include <fstream>

#include "lirlab/geometry.hpp"

namespace lirlab {

struct CoverBall {
  std::size_t center = 0;
  double seed_radius = 0.0;
  double inflated_radius = 0.0;
  int index = 0;
};

struct AdmissibleCover {
  std::vector<CoverBall> balls;
  double epsilon = 0.0;
  int dimension = 0;
  std::vector<int> overlap;  // per-node count of inflated balls containing the node
  int max_overlap = 0;
  double bound = 0.0;        // T
  // per node: the selected ball that witnesses the Vitali property
  std::vector<int> witness;
};

// T = ((1+eps)/(1-eps))^{n/2} * 120^n
inline double overlap_bound(double eps, int n)
{
  return std::pow((1 + eps) / (1 - eps), 0.5 * n) * std::pow(120.0, n);
}

namespace detail {

inline void count_overlap(AdmissibleCover& cover, DistanceEngine& eng, std::size_t nodes)
{
  cover.overlap.assign(nodes, 0);
  for (const auto& b : cover.balls)
    for (auto [v, d] : eng.ball(b.center, b.inflated_radius)) ++cover.overlap[v];
  cover.max_overlap = 0;
  for (int c : cover.overlap) cover.max_overlap = std::max(cover.max_overlap, c);
}

}  // namespace detail

// Greedy Vitali selection in decreasing seed radius, ties by node order.
inline AdmissibleCover build_cover(const AdmissibleRadiusField& field, const MetricField& mf)
{
  const std::size_t N = mf.grid.size();
  if (field.values.size() != N) throw Error(ErrorCode::CoverIncomplete, "radius field does not match the grid");
  for (double v : field.values)
    if (!(v > 0)) throw Error(ErrorCode::CoverIncomplete, "radius field must be strictly positive", v);

  AdmissibleCover cover;
  cover.epsilon = field.epsilon;
  cover.dimension = mf.n();
  cover.bound = overlap_bound(field.epsilon, mf.n());
  cover.witness.assign(N, -1);

  std::vector<double> seed(N);
  for (std::size_t i = 0; i < N; ++i) seed[i] = field.values[i] / 120.0;
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return seed[a] > seed[b]; });

  DistanceEngine eng(mf);
  std::vector<int> selected(N, -1);
  double rmax = 0.0;
  for (std::size_t x : order) {
    int conflict = -1;
    if (!cover.balls.empty()) {
      for (auto [v, d] : eng.ball(x, seed[x] + rmax)) {
        if (selected[v] >= 0 && d <= seed[x] + seed[v] + DistanceEngine::tolerance) {
          conflict = selected[v];
          break;
        }
      }
    }
    if (conflict >= 0) {
      cover.witness[x] = conflict;
      continue;
    }
    CoverBall b;
    b.center = x;
    b.seed_radius = seed[x];
    b.inflated_radius = 5.0 * seed[x];
    b.index = static_cast<int>(cover.balls.size());
    selected[x] = b.index;
    cover.witness[x] = b.index;
    cover.balls.push_back(b);
    rmax = std::max(rmax, seed[x]);
  }

  detail::count_overlap(cover, eng, N);
  for (std::size_t i = 0; i < N; ++i)
    if (cover.overlap[i] == 0)
      throw Error(ErrorCode::CoverIncomplete, "node " + std::to_string(i) + " lies in no inflated ball");
  return cover;
}

struct VitaliAudit {
  bool disjoint = true;
  bool vitali = true;
  bool covered = true;
  std::size_t checked = 0;
};

// Post-hoc check of disjointness, the Vitali property and coverage.
inline VitaliAudit audit_cover(const AdmissibleCover& cover, const AdmissibleRadiusField& field, const MetricField& mf)
{
  VitaliAudit a;
  DistanceEngine eng(mf);
  const std::size_t N = mf.grid.size();
  std::vector<int> sel(N, -1);
  double rmax = 0.0;
  for (const auto& b : cover.balls) {
    sel[b.center] = b.index;
    rmax = std::max(rmax, b.seed_radius);
  }
  for (const auto& b : cover.balls) {
    for (auto [v, d] : eng.ball(b.center, b.seed_radius + rmax)) {
      if (sel[v] >= 0 && v != b.center && d <= b.seed_radius + cover.balls[sel[v]].seed_radius) a.disjoint = false;
    }
  }
  for (std::size_t x = 0; x < N; ++x) {
    ++a.checked;
    const int w = cover.witness[x];
    if (w < 0) {
      a.vitali = false;
      continue;
    }
    const auto& c = cover.balls[w];
    const double rx = field.values[x] / 120.0;
    auto d = eng.within(x, c.center, rx + c.seed_radius);
    // intersecting seed balls, larger witness radius, and B(x, r(x)) inside B(c, 5 r(c))
    if (!d || c.seed_radius < rx - 1e-15 || *d + rx > c.inflated_radius + 1e-12) a.vitali = false;
    if (cover.overlap[x] == 0) a.covered = false;
  }
  return a;
}

struct OverlapStats {
  std::vector<int> counts;
  int max = 0;
  double bound = 0.0;
  bool pass = false;
  double integral_lhs = 0.0;  // sum_j int_{B_j} |f|
  double integral_rhs = 0.0;  // T * ||f||_1
  bool integral_pass = false;
};

inline OverlapStats overlap_stats(const AdmissibleCover& cover, const MetricField& mf, std::uint64_t seed = 7)
{
  OverlapStats s;
  DistanceEngine eng(mf);
  const std::size_t N = mf.grid.size();
  s.counts.assign(N, 0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> f(N);
  for (auto& v : f) v = U(rng);
  double l1 = 0.0;
  for (std::size_t i = 0; i < N; ++i) l1 += f[i] * mf.volume_weight(i);
  double lhs = 0.0;
  for (const auto& b : cover.balls) {
    double part = 0.0;
    for (auto [v, d] : eng.ball(b.center, b.inflated_radius)) {
      ++s.counts[v];
      part += f[v] * mf.volume_weight(v);
    }
    lhs += part;
  }
  for (int c : s.counts) s.max = std::max(s.max, c);
  s.bound = overlap_bound(cover.epsilon, mf.n());
  s.pass = s.max <= s.bound;
  s.integral_lhs = lhs;
  s.integral_rhs = s.bound * l1;
  s.integral_pass = lhs <= s.integral_rhs;
  return s;
}

inline void write_cover_csv(const std::string& path, const AdmissibleCover& cover, const Grid& grid)
{
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IOError, "cannot write " + path);
  os.precision(17);
  os << "index";
  for (int a = 0; a < grid.dim(); ++a) os << ",c" << a;
  os << ",seed_radius,inflated_radius\n";
  for (const auto& b : cover.balls) {
    os << b.index;
    for (double v : grid.coords(b.center)) os << "," << v;
    os << "," << b.seed_radius << "," << b.inflated_radius << "\n";
  }
}

}  // namespace lirlab
