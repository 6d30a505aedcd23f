#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "pino/geometry.hpp"
#include "pino/parallel.hpp"
#include "pino/physics.hpp"
#include "pino/rng.hpp"
#include "pino/tensor.hpp"

namespace pino {

// Walk-on-Spheres estimator for the Dirichlet problem -lap(p) = f (constant
// source) on a 2D domain: each walk jumps to a uniform point on the largest
// boundary-distance circle, accumulating f r^2 / 4 per step (the constant
// source integrated against the disk Green's function), and terminates with
// the boundary value at the nearest boundary point once inside the eps
// shell.  This replaces finite-element ground truth for evaluation.

struct WosConfig {
  int walks = 2000;
  double eps_fraction = 1e-3;  // eps = eps_fraction * domain diameter
  int max_steps = 10000;

  void validate() const {
    if (walks < 1 || eps_fraction <= 0.0 || max_steps < 1)
      throw std::invalid_argument("wos: walks >= 1, eps > 0 and max_steps >= 1 required");
  }
};

struct WosResult {
  Tensor values;   // [n] Monte-Carlo estimates
  Tensor stderrs;  // [n] standard errors of the mean
  std::uint64_t restarts = 0;  // walks restarted after exceeding max_steps
};

template <typename Domain>
WosResult wos_solve(const Domain& dom, const std::function<double(Vec2)>& boundary_value,
                    double source, const Tensor& queries, const WosConfig& config, Rng rng) {
  config.validate();
  if (queries.rank() != 2 || queries.shape[1] != 2)
    throw std::invalid_argument("wos_solve: queries must be [n,2], got " +
                                shape_str(queries.shape));
  const double eps = config.eps_fraction * dom.diameter();
  const std::size_t n = queries.shape[0];
  WosResult out;
  out.values = Tensor(Shape{n});
  out.stderrs = Tensor(Shape{n});
  std::vector<std::uint64_t> restarts(n, 0);

  parallel_for(n, [&](std::size_t qi) {
    const Vec2 q{queries.at(qi, 0), queries.at(qi, 1)};
    Rng point_rng = rng.child({stream::kOracle, qi});
    double sum = 0.0, sumsq = 0.0;
    for (int w = 0; w < config.walks; ++w) {
      double acc = 0.0;
      Vec2 x = q;
      int steps = 0;
      double d = dom.boundary_distance(x);
      while (d > eps) {
        acc += source * d * d * 0.25;
        const double a = point_rng.uniform(0.0, 2.0 * kPi);
        x = x + Vec2{d * std::cos(a), d * std::sin(a)};
        d = dom.boundary_distance(x);
        if (++steps > config.max_steps) {
          if (++restarts[qi] > 1000ULL * static_cast<std::uint64_t>(config.walks))
            throw std::runtime_error("wos_solve: walk restart budget exhausted; raise max_steps");
          acc = 0.0;
          x = q;
          steps = 0;
          d = dom.boundary_distance(x);
        }
      }
      const double v = acc + boundary_value(dom.nearest_boundary_point(x));
      sum += v;
      sumsq += v * v;
    }
    const double m = sum / config.walks;
    out.values.data[qi] = m;
    const double var = std::max(0.0, sumsq / config.walks - m * m);
    out.stderrs.data[qi] =
        config.walks > 1 ? std::sqrt(var / static_cast<double>(config.walks - 1)) : 0.0;
  });
  for (auto r : restarts) out.restarts += r;
  return out;
}

/// Piecewise-linear interpolant (in arc length, wrapping around the closed
/// polygon) of boundary values sampled at discrete boundary points; lets the
/// walks query g anywhere on the boundary.
class PolygonBoundaryInterpolant {
 public:
  PolygonBoundaryInterpolant(const PolygonDomain& dom, const Tensor& points, const Tensor& values)
      : dom_(dom), perimeter_(dom.perimeter()) {
    if (points.shape[0] != values.shape[0] || points.shape[0] == 0)
      throw std::invalid_argument("boundary interpolant: points/values mismatch");
    const std::size_t m = points.shape[0];
    knots_.resize(m);
    for (std::size_t i = 0; i < m; ++i)
      knots_[i] = {dom.arc_coordinate({points.at(i, 0), points.at(i, 1)}), values.data[i]};
    std::sort(knots_.begin(), knots_.end());
  }

  double operator()(Vec2 p) const {
    const double s = dom_.arc_coordinate(p);
    const auto it = std::lower_bound(knots_.begin(), knots_.end(), std::pair{s, -1e300});
    // Wrap around between the last and first knot.
    const auto& hi = it == knots_.end() ? knots_.front() : *it;
    const auto& lo = it == knots_.begin() ? knots_.back() : *(it - 1);
    double span = hi.first - lo.first;
    double t = s - lo.first;
    if (span <= 0.0) {  // wrapped segment
      span += perimeter_;
      if (t < 0.0) t += perimeter_;
    }
    if (span <= 0.0) return lo.second;
    return lo.second + (t / span) * (hi.second - lo.second);
  }

 private:
  PolygonDomain dom_;
  double perimeter_;
  std::vector<std::pair<double, double>> knots_;
};

// ---------------------------------------------------------------------------
// Manufactured plate fields: analytic displacement pairs with known residual
// constants, used to verify the plane-stress operators without an elasticity
// solver.

enum class ManufacturedField { kLinear, kQuadratic };

struct PlateOracle {
  // Coefficients of u = u0 + ux x + uy y (+ uxx x^2), same for v.
  double u0 = 0, ux = 0, uy = 0, uxx = 0;
  double v0 = 0, vx = 0, vy = 0;
  double residual_u = 0.0;  // constant residual of the governing system
  double residual_v = 0.0;

  double u(double x, double y) const { return u0 + ux * x + uy * y + uxx * x * x; }
  double v(double x, double y) const { return v0 + vx * x + vy * y; }

  /// Build the field on a tape so the residual operators can differentiate it.
  std::vector<Var> on_tape(Tape& tape, Var x) const {
    Var cx = column(x, 0);
    Var cy = column(x, 1);
    Var uu = add(affine(cx, u0, ux), add(scale(cy, uy), scale(square(cx), uxx)));
    Var vv = add(affine(cx, v0, vx), scale(cy, vy));
    return {uu, vv};
  }
};

/// Linear fields have identically zero residuals; the quadratic field
/// u = x^2, v = 0 has r_u = 2E/(1-mu^2) and r_v = 0.
inline PlateOracle manufactured_plate(ManufacturedField which, const MaterialParams& mat) {
  mat.validate();
  PlateOracle f;
  if (which == ManufacturedField::kLinear) {
    f.u0 = 0.3;
    f.ux = 0.1;
    f.uy = -0.05;
    f.v0 = -0.2;
    f.vx = 0.07;
    f.vy = 0.12;
  } else {
    f.uxx = 1.0;
    f.residual_u = 2.0 * mat.youngs / (1.0 - mat.poisson * mat.poisson);
  }
  return f;
}

/// Relative L2 error ||pred - ref||_2 / ||ref||_2.
inline double relative_l2(const Tensor& pred, const Tensor& ref) {
  if (pred.size() != ref.size())
    throw std::invalid_argument("relative_l2: length mismatch " + shape_str(pred.shape) + " vs " +
                                shape_str(ref.shape));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = pred.data[i] - ref.data[i];
    num += d * d;
    den += ref.data[i] * ref.data[i];
  }
  if (den == 0.0) throw std::invalid_argument("relative_l2: reference norm is zero");
  return std::sqrt(num / den);
}

}  // namespace pino
