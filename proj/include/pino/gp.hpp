#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pino/rng.hpp"
#include "pino/tensor.hpp"

namespace pino {

enum class KernelAxis { kX, kY };

/// Squared-exponential Gaussian process over one coordinate axis:
/// K(a,b) = exp(-(a-b)^2 / (2 l^2)) on the chosen component.
struct GPSpec {
  double mean = 0.0;
  double lengthscale = 1.0;
  KernelAxis axis = KernelAxis::kX;
};

inline Tensor gp_kernel_matrix(const Tensor& points, const GPSpec& spec) {
  if (spec.lengthscale <= 0.0) throw std::invalid_argument("gp: lengthscale must be positive");
  const std::size_t m = points.shape[0];
  const std::size_t c = spec.axis == KernelAxis::kX ? 0 : 1;
  const double inv = 1.0 / (2.0 * spec.lengthscale * spec.lengthscale);
  Tensor k(Shape{m, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double d = points.at(i, c) - points.at(j, c);
      k.at(i, j) = std::exp(-d * d * inv);
    }
  return k;
}

/// In-place lower-triangular Cholesky; returns false if a pivot fails.
inline bool cholesky_lower(Tensor& a) {
  const std::size_t m = a.shape[0];
  for (std::size_t j = 0; j < m; ++j) {
    double d = a.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a.at(j, k) * a.at(j, k);
    if (!(d > 0.0)) return false;
    const double l = std::sqrt(d);
    a.at(j, j) = l;
    for (std::size_t i = j + 1; i < m; ++i) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a.at(i, k) * a.at(j, k);
      a.at(i, j) = s / l;
    }
    for (std::size_t i = 0; i < j; ++i) a.at(i, j) = 0.0;
  }
  return true;
}

/// One GP draw at m points: mean + L z with L the jittered Cholesky factor.
/// Jitter starts at 1e-10 * trace/m and escalates tenfold up to 1e-6.
inline Tensor sample_gp(const Tensor& points, const GPSpec& spec, Rng& rng) {
  if (points.rank() != 2 || points.shape[1] != 2 || points.shape[0] == 0)
    throw std::invalid_argument("sample_gp: points must be [m,2] with m >= 1, got " +
                                shape_str(points.shape));
  const std::size_t m = points.shape[0];
  Tensor kernel = gp_kernel_matrix(points, spec);
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) trace += kernel.at(i, i);

  Tensor chol;
  bool ok = false;
  for (double jitter = 1e-10 * trace / static_cast<double>(m); jitter <= 1e-6; jitter *= 10.0) {
    chol = kernel;
    for (std::size_t i = 0; i < m; ++i) chol.at(i, i) += jitter;
    if (cholesky_lower(chol)) {
      ok = true;
      break;
    }
  }
  if (!ok) throw std::runtime_error("sample_gp: Cholesky failed even at jitter 1e-6");

  std::vector<double> z(m);
  for (auto& v : z) v = rng.normal();
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = spec.mean;
    for (std::size_t j = 0; j <= i; ++j) s += chol.at(i, j) * z[j];
    out.data[i] = s;
  }
  return out;
}

}  // namespace pino
