#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace lirlab {

using cplx = std::complex<double>;

enum class ErrorCode {
  InvalidModel,
  NotAdmissible,
  InjectionRejected,
  CoverIncomplete,
  ChainExhausted,
  InfiniteExponent,
  RankMismatch,
  NotElliptic,
  ThresholdAmbiguous,
  NotOrthogonal,
  NoConvergence,
  BallTooLarge,
  GridMisaligned,
  GramSingular,
  ConfigInvalid,
  IOError,
};

inline const char* error_name(ErrorCode c)
{
  switch (c) {
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::NotAdmissible: return "NotAdmissible";
    case ErrorCode::InjectionRejected: return "InjectionRejected";
    case ErrorCode::CoverIncomplete: return "CoverIncomplete";
    case ErrorCode::ChainExhausted: return "ChainExhausted";
    case ErrorCode::InfiniteExponent: return "InfiniteExponent";
    case ErrorCode::RankMismatch: return "RankMismatch";
    case ErrorCode::NotElliptic: return "NotElliptic";
    case ErrorCode::ThresholdAmbiguous: return "ThresholdAmbiguous";
    case ErrorCode::NotOrthogonal: return "NotOrthogonal";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BallTooLarge: return "BallTooLarge";
    case ErrorCode::GridMisaligned: return "GridMisaligned";
    case ErrorCode::GramSingular: return "GramSingular";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IOError: return "IOError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& msg, double value = std::nan(""))
      : std::runtime_error(std::string(error_name(code)) + ": " + msg), code_(code), value_(value)
  {
  }
  ErrorCode code() const { return code_; }
  // measured quantity attached to the failure (residual, norm, ...), NaN if none
  double value() const { return value_; }

private:
  ErrorCode code_;
  double value_;
};

// Uniform chart grid. Axis 0 is the slowest index. Periodic axes of length L
// carry N nodes at i*L/N; a non-periodic axis of length L carries N nodes at
// i*L/(N-1), both end points included.
struct Grid {
  std::vector<int> shape;
  std::vector<double> lengths;
  std::vector<bool> periodic;

  int dim() const { return static_cast<int>(shape.size()); }

  std::size_t size() const
  {
    std::size_t s = 1;
    for (int n : shape) s *= static_cast<std::size_t>(n);
    return s;
  }

  double spacing(int axis) const
  {
    const int n = shape[axis];
    if (periodic[axis]) return lengths[axis] / n;
    return n > 1 ? lengths[axis] / (n - 1) : lengths[axis];
  }

  std::size_t stride(int axis) const
  {
    std::size_t s = 1;
    for (int a = dim() - 1; a > axis; --a) s *= static_cast<std::size_t>(shape[a]);
    return s;
  }

  std::vector<int> unravel(std::size_t idx) const
  {
    std::vector<int> c(dim());
    for (int a = dim() - 1; a >= 0; --a) {
      c[a] = static_cast<int>(idx % static_cast<std::size_t>(shape[a]));
      idx /= static_cast<std::size_t>(shape[a]);
    }
    return c;
  }

  std::size_t ravel(const std::vector<int>& c) const
  {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx = idx * static_cast<std::size_t>(shape[a]) + static_cast<std::size_t>(c[a]);
    return idx;
  }

  std::vector<double> coords(std::size_t idx) const
  {
    auto c = unravel(idx);
    std::vector<double> x(dim());
    for (int a = 0; a < dim(); ++a) x[a] = c[a] * spacing(a);
    return x;
  }

  // quadrature cell volume of a node; boundary nodes of non-periodic axes get half cells
  double cell_volume(std::size_t idx) const
  {
    auto c = unravel(idx);
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) {
      double h = spacing(a);
      if (!periodic[a] && shape[a] > 1 && (c[a] == 0 || c[a] == shape[a] - 1)) h *= 0.5;
      v *= h;
    }
    return v;
  }

  bool fully_periodic() const
  {
    for (bool p : periodic)
      if (!p) return false;
    return true;
  }

  bool operator==(const Grid& o) const
  {
    return shape == o.shape && lengths == o.lengths && periodic == o.periodic;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

inline Grid periodic_grid(std::vector<int> shape, std::vector<double> lengths)
{
  Grid g;
  g.periodic.assign(shape.size(), true);
  g.shape = std::move(shape);
  g.lengths = std::move(lengths);
  return g;
}

// signed integer frequency of FFT bin i on an axis of N nodes; the Nyquist bin maps to -N/2
inline int fft_frequency(int i, int n) { return i < (n + 1) / 2 ? i : i - n; }

// shortest periodic displacement t -> (-L/2, L/2]
inline double wrap_displacement(double t, double L)
{
  t = std::fmod(t, L);
  if (t > 0.5 * L) t -= L;
  if (t <= -0.5 * L) t += L;
  return t;
}

inline constexpr double pi = 3.14159265358979323846;

}  // namespace lirlab
