#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "lirlab/common.hpp"

namespace lirlab {

namespace detail {

struct PlanKey {
  std::vector<int> shape;
  int rank;
  int axis;
  int sign;
  bool operator<(const PlanKey& o) const
  {
    return std::tie(shape, rank, axis, sign) < std::tie(o.shape, o.rank, o.axis, o.sign);
  }
};

// FFTW planning is not thread safe; plans are created once and reused through
// the new-array execute interface.
inline fftw_plan axis_plan(const Grid& grid, int rank, int axis, int sign, cplx* data)
{
  static std::map<PlanKey, fftw_plan> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  PlanKey key{grid.shape, rank, axis, sign};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  fftw_iodim dim;
  dim.n = grid.shape[axis];
  dim.is = static_cast<int>(grid.stride(axis)) * rank;
  dim.os = dim.is;

  std::vector<fftw_iodim> loops;
  for (int a = 0; a < grid.dim(); ++a) {
    if (a == axis) continue;
    fftw_iodim d;
    d.n = grid.shape[a];
    d.is = static_cast<int>(grid.stride(a)) * rank;
    d.os = d.is;
    loops.push_back(d);
  }
  fftw_iodim comp;
  comp.n = rank;
  comp.is = 1;
  comp.os = 1;
  loops.push_back(comp);

  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_plan plan = fftw_plan_guru_dft(1, &dim, static_cast<int>(loops.size()), loops.data(), p, p, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, plan);
  return plan;
}

}  // namespace detail

// In-place 1-D DFT along one axis of node-major rank-N data (unnormalized).
inline void fft_axis(std::vector<cplx>& data, const Grid& grid, int rank, int axis, int sign)
{
  if (grid.shape[axis] <= 1) return;
  fftw_plan plan = detail::axis_plan(grid, rank, axis, sign, data.data());
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

// Full forward transform over all periodic axes.
inline void fft_forward(std::vector<cplx>& data, const Grid& grid, int rank)
{
  for (int a = 0; a < grid.dim(); ++a) fft_axis(data, grid, rank, a, FFTW_FORWARD);
}

// Full inverse transform, normalized so that inverse(forward(x)) = x.
inline void fft_inverse(std::vector<cplx>& data, const Grid& grid, int rank)
{
  for (int a = 0; a < grid.dim(); ++a) fft_axis(data, grid, rank, a, FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(grid.size());
  for (auto& v : data) v *= s;
}

// Angular wavenumber of bin i on a periodic axis.
inline double wavenumber(const Grid& grid, int axis, int i)
{
  return 2.0 * pi * fft_frequency(i, grid.shape[axis]) / grid.lengths[axis];
}

// Spectral derivative of order `order` along a periodic axis, in place.
inline void spectral_derivative(std::vector<cplx>& data, const Grid& grid, int rank, int axis, int order)
{
  if (order == 0) return;
  const int n = grid.shape[axis];
  if (n <= 1) {
    std::fill(data.begin(), data.end(), cplx(0.0));
    return;
  }
  fft_axis(data, grid, rank, axis, FFTW_FORWARD);
  const std::size_t st = grid.stride(axis);
  const std::size_t total = grid.size();
  std::vector<cplx> mult(n);
  for (int i = 0; i < n; ++i) mult[i] = std::pow(cplx(0.0, wavenumber(grid, axis, i)), order) / static_cast<double>(n);
  for (std::size_t node = 0; node < total; ++node) {
    const int i = static_cast<int>((node / st) % static_cast<std::size_t>(n));
    for (int c = 0; c < rank; ++c) data[node * rank + c] *= mult[i];
  }
  fft_axis(data, grid, rank, axis, FFTW_BACKWARD);
}

}  // namespace lirlab
