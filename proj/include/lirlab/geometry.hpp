#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <random>

#include "lirlab/common.hpp"

namespace lirlab {

enum class ManifoldKind { flat_torus, bumpy_torus, cylinder_with_boundary };

inline const char* manifold_name(ManifoldKind k)
{
  switch (k) {
    case ManifoldKind::flat_torus: return "flat_torus";
    case ManifoldKind::bumpy_torus: return "bumpy_torus";
    case ManifoldKind::cylinder_with_boundary: return "cylinder_with_boundary";
  }
  return "?";
}

struct ManifoldModel {
  ManifoldKind kind = ManifoldKind::flat_torus;
  int dimension = 1;
  std::vector<double> periods;  // one per axis; the boundary axis entry is ignored
  double amplitude = 0.0;       // bumpy_torus
  std::vector<int> frequency;   // bumpy_torus
  double boundary_length = 0.0; // cylinder_with_boundary
  int boundary_axis = -1;       // cylinder_with_boundary, defaults to the last axis

  static ManifoldModel flat(std::vector<double> periods)
  {
    ManifoldModel m;
    m.kind = ManifoldKind::flat_torus;
    m.dimension = static_cast<int>(periods.size());
    m.periods = std::move(periods);
    return m;
  }

  static ManifoldModel bumpy(std::vector<double> periods, double a, std::vector<int> k)
  {
    ManifoldModel m = flat(std::move(periods));
    m.kind = ManifoldKind::bumpy_torus;
    m.amplitude = a;
    m.frequency = std::move(k);
    return m;
  }

  static ManifoldModel cylinder(std::vector<double> periods, double length)
  {
    ManifoldModel m = flat(std::move(periods));
    m.kind = ManifoldKind::cylinder_with_boundary;
    m.boundary_length = length;
    m.boundary_axis = m.dimension - 1;
    return m;
  }

  int bnd_axis() const
  {
    if (kind != ManifoldKind::cylinder_with_boundary) return -1;
    return boundary_axis >= 0 ? boundary_axis : dimension - 1;
  }

  double axis_length(int a) const { return a == bnd_axis() ? boundary_length : periods[a]; }

  void validate() const
  {
    if (dimension < 1) throw Error(ErrorCode::InvalidModel, "dimension must be >= 1");
    if (static_cast<int>(periods.size()) != dimension)
      throw Error(ErrorCode::InvalidModel, "need one period per axis");
    for (int a = 0; a < dimension; ++a)
      if (a != bnd_axis() && !(periods[a] > 0)) throw Error(ErrorCode::InvalidModel, "periods must be > 0");
    if (kind == ManifoldKind::bumpy_torus) {
      if (!(std::abs(amplitude) < 1)) throw Error(ErrorCode::InvalidModel, "bumpy torus needs |a| < 1", amplitude);
      if (static_cast<int>(frequency.size()) != dimension)
        throw Error(ErrorCode::InvalidModel, "frequency vector must have one entry per axis");
    }
    if (kind == ManifoldKind::cylinder_with_boundary) {
      int b = bnd_axis();
      if (b < 0 || b >= dimension) throw Error(ErrorCode::InvalidModel, "boundary axis out of range");
      if (!(boundary_length > 0)) throw Error(ErrorCode::InvalidModel, "boundary interval length must be > 0");
    }
  }

  // phase <k, y> of the bump, with k measured in periods so the metric is periodic
  double phase(const double* y) const
  {
    double s = 0.0;
    for (int a = 0; a < dimension; ++a) s += frequency[a] * 2.0 * pi / periods[a] * y[a];
    return s;
  }

  double wave(int a) const { return frequency[a] * 2.0 * pi / periods[a]; }

  // conformal factor rho with g = rho * delta
  double conformal_factor(const double* y) const
  {
    if (kind != ManifoldKind::bumpy_torus) return 1.0;
    return 1.0 + amplitude * std::sin(phase(y));
  }

  // d^beta rho for a multi-index given as counts per axis
  double conformal_derivative(const std::vector<int>& beta, const double* y) const
  {
    int order = 0;
    for (int b : beta) order += b;
    if (order == 0) return conformal_factor(y);
    if (kind != ManifoldKind::bumpy_torus) return 0.0;
    double kb = 1.0;
    for (int a = 0; a < dimension; ++a) kb *= std::pow(wave(a), beta[a]);
    return amplitude * kb * std::sin(phase(y) + order * 0.5 * pi);
  }

  // sup over M of |eig(g) - 1| and of sum_{1<=|b|<=m-1} sup |d^b g|
  double global_eigen_deviation() const { return kind == ManifoldKind::bumpy_torus ? std::abs(amplitude) : 0.0; }
};

// Multi-indices (counts per axis) with lo <= |beta| <= hi, in graded lexicographic order.
inline std::vector<std::vector<int>> multi_indices(int n, int lo, int hi)
{
  std::vector<std::vector<int>> out;
  for (int order = lo; order <= hi; ++order) {
    std::vector<int> b(n, 0);
    std::function<void(int, int)> rec = [&](int axis, int left) {
      if (axis == n - 1) {
        b[axis] = left;
        out.push_back(b);
        return;
      }
      for (int v = left; v >= 0; --v) {
        b[axis] = v;
        rec(axis + 1, left - v);
      }
    };
    if (n > 0) rec(0, order);
  }
  return out;
}

inline double global_derivative_sum(const ManifoldModel& model, int m)
{
  if (model.kind != ManifoldKind::bumpy_torus) return 0.0;
  double s = 0.0;
  for (const auto& b : multi_indices(model.dimension, 1, m - 1)) {
    double kb = 1.0;
    for (int a = 0; a < model.dimension; ++a) kb *= std::pow(std::abs(model.wave(a)), b[a]);
    s += std::abs(model.amplitude) * kb;
  }
  return s;
}

// Metric sampled on the chart grid. Layout: g[node*n*n + i*n + j],
// dg[node*n*n*n + k*n*n + i*n + j] = d_k g_ij.
struct MetricField {
  ManifoldModel model;
  Grid grid;
  std::vector<double> g, dg, ginv, sqrt_det;

  int n() const { return grid.dim(); }
  double gij(std::size_t node, int i, int j) const { return g[node * n() * n() + i * n() + j]; }
  double ginv_ij(std::size_t node, int i, int j) const { return ginv[node * n() * n() + i * n() + j]; }
  double dgij(std::size_t node, int k, int i, int j) const
  {
    return dg[node * n() * n() * n() + k * n() * n() + i * n() + j];
  }
  bool flat() const { return model.kind != ManifoldKind::bumpy_torus || model.amplitude == 0.0; }

  // midpoint-rule weight of a node: sqrt(det g) times the cell volume
  double volume_weight(std::size_t node) const { return sqrt_det[node] * grid.cell_volume(node); }

  double total_volume() const
  {
    double v = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) v += volume_weight(i);
    return v;
  }

  // analytic metric at a chart point
  Eigen::MatrixXd metric_at(const double* y) const
  {
    return model.conformal_factor(y) * Eigen::MatrixXd::Identity(n(), n());
  }
};

namespace detail {

inline MetricField sample_metric(const ManifoldModel& model, const std::vector<int>& resolution)
{
  MetricField mf;
  mf.model = model;
  mf.grid.shape = resolution;
  mf.grid.lengths.resize(model.dimension);
  mf.grid.periodic.resize(model.dimension);
  for (int a = 0; a < model.dimension; ++a) {
    mf.grid.lengths[a] = model.axis_length(a);
    mf.grid.periodic[a] = a != model.bnd_axis();
  }
  const int n = model.dimension;
  const std::size_t N = mf.grid.size();
  mf.g.assign(N * n * n, 0.0);
  mf.ginv.assign(N * n * n, 0.0);
  mf.dg.assign(N * n * n * n, 0.0);
  mf.sqrt_det.assign(N, 1.0);
  for (std::size_t node = 0; node < N; ++node) {
    auto y = mf.grid.coords(node);
    const double rho = model.conformal_factor(y.data());
    for (int i = 0; i < n; ++i) {
      mf.g[node * n * n + i * n + i] = rho;
      mf.ginv[node * n * n + i * n + i] = 1.0 / rho;
    }
    mf.sqrt_det[node] = std::pow(rho, 0.5 * n);
    if (model.kind == ManifoldKind::bumpy_torus) {
      for (int k = 0; k < n; ++k) {
        std::vector<int> beta(n, 0);
        beta[k] = 1;
        const double d = model.conformal_derivative(beta, y.data());
        for (int i = 0; i < n; ++i) mf.dg[node * n * n * n + k * n * n + i * n + i] = d;
      }
    }
  }
  return mf;
}

}  // namespace detail

inline MetricField build_metric(const ManifoldModel& model, const std::vector<int>& resolution)
{
  model.validate();
  if (static_cast<int>(resolution.size()) != model.dimension)
    throw Error(ErrorCode::InvalidModel, "resolution must have one entry per axis");
  for (int r : resolution)
    if (r < 4) throw Error(ErrorCode::InvalidModel, "resolution must be >= 4 per axis");
  return detail::sample_metric(model, resolution);
}

// Shortest paths on the grid graph with the full {-1,0,1}^n stencil. Edge
// length is the coordinate step measured with the metric at the edge midpoint.
class DistanceEngine {
public:
  explicit DistanceEngine(const MetricField& mf) : mf_(&mf)
  {
    const int n = mf.n();
    std::vector<int> o(n, -1);
    for (;;) {
      bool zero = std::all_of(o.begin(), o.end(), [](int v) { return v == 0; });
      if (!zero) offsets_.push_back(o);
      int a = n - 1;
      while (a >= 0 && o[a] == 1) {
        o[a] = -1;
        --a;
      }
      if (a < 0) break;
      ++o[a];
    }
    for (const auto& off : offsets_) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += std::pow(off[a] * mf.grid.spacing(a), 2);
      flat_len_.push_back(std::sqrt(s));
    }
    dist_.assign(mf.grid.size(), std::numeric_limits<double>::infinity());
  }

  const MetricField& metric() const { return *mf_; }

  // nodes with d(src, node) <= radius, paired with their distance, in settle order
  std::vector<std::pair<std::size_t, double>> ball(std::size_t src, double radius)
  {
    std::vector<std::pair<std::size_t, double>> out;
    run(src, radius, [&](std::size_t v, double d) {
      out.emplace_back(v, d);
      return false;
    });
    return out;
  }

  // d(src, dst) if it is <= radius
  std::optional<double> within(std::size_t src, std::size_t dst, double radius)
  {
    std::optional<double> res;
    run(src, radius, [&](std::size_t v, double d) {
      if (v == dst) {
        res = d;
        return true;
      }
      return false;
    });
    return res;
  }

  double distance(std::size_t src, std::size_t dst)
  {
    auto d = within(src, dst, std::numeric_limits<double>::infinity());
    return d ? *d : std::numeric_limits<double>::infinity();
  }

  static constexpr double tolerance = 1e-12;

private:
  double edge_length(const std::vector<int>& c, std::size_t k) const
  {
    const auto& off = offsets_[k];
    if (mf_->flat()) return flat_len_[k];
    const int n = mf_->n();
    double y[8];
    for (int a = 0; a < n; ++a) y[a] = (c[a] + 0.5 * off[a]) * mf_->grid.spacing(a);
    return std::sqrt(mf_->model.conformal_factor(y)) * flat_len_[k];
  }

  template <class Visit>
  void run(std::size_t src, double radius, Visit&& visit)
  {
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    const Grid& grid = mf_->grid;
    const int n = grid.dim();
    touched_.clear();
    dist_[src] = 0.0;
    touched_.push_back(src);
    pq.emplace(0.0, src);
    std::vector<int> nb(n);
    while (!pq.empty()) {
      auto [d, v] = pq.top();
      pq.pop();
      if (d > dist_[v]) continue;
      if (d > radius + tolerance) break;
      if (visit(v, d)) break;
      auto c = grid.unravel(v);
      for (std::size_t k = 0; k < offsets_.size(); ++k) {
        bool ok = true;
        for (int a = 0; a < n; ++a) {
          int q = c[a] + offsets_[k][a];
          if (grid.periodic[a]) {
            q = (q % grid.shape[a] + grid.shape[a]) % grid.shape[a];
          } else if (q < 0 || q >= grid.shape[a]) {
            ok = false;
            break;
          }
          nb[a] = q;
        }
        if (!ok) continue;
        std::size_t w = grid.ravel(nb);
        if (w == v) continue;
        double nd = d + edge_length(c, k);
        if (nd > radius + tolerance) continue;
        if (nd < dist_[w]) {
          if (std::isinf(dist_[w])) touched_.push_back(w);
          dist_[w] = nd;
          pq.emplace(nd, w);
        }
      }
    }
    for (auto t : touched_) dist_[t] = std::numeric_limits<double>::infinity();
  }

  const MetricField* mf_;
  std::vector<std::vector<int>> offsets_;
  std::vector<double> flat_len_;
  std::vector<double> dist_;
  std::vector<std::size_t> touched_;
};

inline double distance(const MetricField& mf, std::size_t x, std::size_t y)
{
  DistanceEngine eng(mf);
  return eng.distance(x, y);
}

// Half the smallest chart period (the boundary axis counts with its length).
inline double chart_radius(const ManifoldModel& model)
{
  double r = std::numeric_limits<double>::infinity();
  for (int a = 0; a < model.dimension; ++a) r = std::min(r, 0.5 * model.axis_length(a));
  return r;
}

// m,eps-admissible radius in the canonical translated chart. The ball is
// sampled on a fixed lattice (spacing = finest grid spacing) whose offsets are
// sorted by length, so the sampled sup is monotone in R.
class AdmissibilitySampler {
public:
  AdmissibilitySampler(const MetricField& mf, double eps, int m) : mf_(&mf), eps_(eps), m_(m)
  {
    if (!(eps > 0 && eps < 1)) throw Error(ErrorCode::InvalidModel, "epsilon must lie in (0,1)", eps);
    if (m < 1) throw Error(ErrorCode::InvalidModel, "m must be >= 1");
    const int n = mf.n();
    cap_ = std::min(1.0, chart_radius(mf.model));
    betas_ = multi_indices(n, 1, m - 1);
    globally_ok_ = mf.model.global_eigen_deviation() <= eps && global_derivative_sum(mf.model, m) <= eps;
    if (globally_ok_) return;
    double h = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) h = std::min(h, mf.grid.spacing(a));
    h_ = h;
    const int R = static_cast<int>(std::ceil(cap_ / h));
    std::vector<int> o(n, -R);
    for (;;) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += std::pow(o[a] * h, 2);
      const double r = std::sqrt(s);
      if (r <= cap_ + 1e-15) {
        lattice_.push_back(o);
        norms_.push_back(r);
      }
      int a = n - 1;
      while (a >= 0 && o[a] == R) {
        o[a] = -R;
        --a;
      }
      if (a < 0) break;
      ++o[a];
    }
    std::vector<std::size_t> idx(lattice_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return norms_[i] < norms_[j]; });
    std::vector<std::vector<int>> L;
    std::vector<double> N;
    for (auto i : idx) {
      L.push_back(lattice_[i]);
      N.push_back(norms_[i]);
    }
    lattice_ = std::move(L);
    norms_ = std::move(N);
  }

  double cap() const { return cap_; }
  static constexpr double bisection_tolerance = 1e-4;

  double radius(std::size_t node) const
  {
    if (globally_ok_) return cap_;
    const int n = mf_->n();
    auto x = mf_->grid.coords(node);
    std::vector<double> y(n);
    std::vector<double> sup(betas_.size(), 0.0);
    double first_bad = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < lattice_.size(); ++s) {
      for (int a = 0; a < n; ++a) y[a] = x[a] + lattice_[s][a] * h_;
      const double dev = std::abs(mf_->model.conformal_factor(y.data()) - 1.0);
      double sum = 0.0;
      for (std::size_t b = 0; b < betas_.size(); ++b) {
        sup[b] = std::max(sup[b], std::abs(mf_->model.conformal_derivative(betas_[b], y.data())));
        sum += sup[b];
      }
      if (dev > eps_ || sum > eps_) {
        if (s == 0)
          throw Error(ErrorCode::NotAdmissible, "conditions fail at the center node " + std::to_string(node), sum);
        first_bad = norms_[s];
        break;
      }
    }
    if (std::isinf(first_bad)) return cap_;
    // bisection on ok(R) := every sampled offset with |y| <= R satisfies both conditions
    double lo = 0.0, hi = std::min(cap_, first_bad);
    if (first_bad > cap_) return cap_;
    while (hi - lo > bisection_tolerance) {
      double mid = 0.5 * (lo + hi);
      if (mid < first_bad)
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  }

private:
  const MetricField* mf_;
  double eps_;
  int m_;
  double cap_ = 1.0;
  double h_ = 0.0;
  bool globally_ok_ = false;
  std::vector<std::vector<int>> betas_;
  std::vector<std::vector<int>> lattice_;
  std::vector<double> norms_;
};

inline double admissible_radius(const MetricField& mf, std::size_t x, double eps, int m)
{
  return AdmissibilitySampler(mf, eps, m).radius(x);
}

enum class RadiusProvenance { computed, injected };

struct AdmissibleRadiusField {
  std::vector<double> values;
  double epsilon = 0.0;
  int m = 0;
  RadiusProvenance provenance = RadiusProvenance::computed;

  double max() const { return *std::max_element(values.begin(), values.end()); }
  double min() const { return *std::min_element(values.begin(), values.end()); }
};

struct ComparabilityReport {
  std::size_t pairs = 0;
  std::size_t premise_hits = 0;  // pairs with d <= (R(x)+R(y))/4
  std::size_t violations = 0;
  std::size_t witness_x = 0, witness_y = 0;
  bool pass() const { return violations == 0; }
};

// Sampled radius comparability check: d(x,y) <= (R(x)+R(y))/4 implies R(x) <= 4 R(y). Half of the pairs are uniform, half are local
// (y within three grid steps of x per axis) so that the premise is exercised.
inline ComparabilityReport comparability_check(const AdmissibleRadiusField& field, const MetricField& mf, std::size_t pairs = 10000,
                             std::uint64_t seed = 1)
{
  ComparabilityReport rep;
  const Grid& grid = mf.grid;
  const std::size_t N = grid.size();
  if (N < 2) return rep;
  DistanceEngine eng(mf);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  std::uniform_int_distribution<int> step(-3, 3);
  for (std::size_t p = 0; p < pairs; ++p) {
    std::size_t x = pick(rng), y;
    if (p % 2 == 0) {
      y = pick(rng);
    } else {
      auto c = grid.unravel(x);
      for (int a = 0; a < grid.dim(); ++a) {
        int q = c[a] + step(rng);
        if (grid.periodic[a])
          q = (q % grid.shape[a] + grid.shape[a]) % grid.shape[a];
        else
          q = std::clamp(q, 0, grid.shape[a] - 1);
        c[a] = q;
      }
      y = grid.ravel(c);
    }
    ++rep.pairs;
    const double Rx = field.values[x], Ry = field.values[y];
    auto d = eng.within(x, y, 0.25 * (Rx + Ry));
    if (!d) continue;
    ++rep.premise_hits;
    if (Rx > 4.0 * Ry * (1 + 1e-12)) {
      if (rep.violations == 0) {
        rep.witness_x = x;
        rep.witness_y = y;
      }
      ++rep.violations;
    }
  }
  return rep;
}

inline AdmissibleRadiusField radius_field(const MetricField& mf, double eps, int m)
{
  AdmissibilitySampler sampler(mf, eps, m);
  AdmissibleRadiusField f;
  f.epsilon = eps;
  f.m = m;
  f.provenance = RadiusProvenance::computed;
  f.values.resize(mf.grid.size());
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = sampler.radius(i);
  return f;
}

inline AdmissibleRadiusField inject_radius_field(const MetricField& mf, std::vector<double> values, double eps, int m,
                                                 std::uint64_t seed = 1)
{
  if (values.size() != mf.grid.size())
    throw Error(ErrorCode::InjectionRejected, "radius field size does not match the grid");
  for (double v : values)
    if (!(v > 0 && v <= 1)) throw Error(ErrorCode::InjectionRejected, "injected radius outside (0,1]", v);
  AdmissibleRadiusField f;
  f.values = std::move(values);
  f.epsilon = eps;
  f.m = m;
  f.provenance = RadiusProvenance::injected;
  auto rep = comparability_check(f, mf, 10000, seed);
  if (!rep.pass())
    throw Error(ErrorCode::InjectionRejected,
                "radius comparability violated for nodes " + std::to_string(rep.witness_x) + ", " + std::to_string(rep.witness_y),
                static_cast<double>(rep.violations));
  return f;
}

inline void write_radius_csv(const std::string& path, const AdmissibleRadiusField& f, const Grid& grid)
{
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IOError, "cannot write " + path);
  os.precision(17);
  for (int a = 0; a < grid.dim(); ++a) os << "x" << a << ",";
  os << "R\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto x = grid.coords(i);
    for (double v : x) os << v << ",";
    os << f.values[i] << "\n";
  }
}

// Reads the R column of a radius CSV written by write_radius_csv.
inline std::vector<double> read_radius_csv(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IOError, "cannot read " + path);
  std::string line;
  std::getline(is, line);
  std::vector<double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto pos = line.find_last_of(',');
    out.push_back(std::stod(pos == std::string::npos ? line : line.substr(pos + 1)));
  }
  return out;
}

}  // namespace lirlab
