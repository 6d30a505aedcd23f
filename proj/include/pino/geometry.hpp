#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pino/rng.hpp"
#include "pino/tensor.hpp"

namespace pino {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Closest point to p on segment [a,b].
inline Vec2 closest_on_segment(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 u = b - a;
  const double uu = dot(u, u);
  double t = uu > 0.0 ? dot(p - a, u) / uu : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return a + t * u;
}

inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

/// Coordinates of boundary points, one named group per boundary segment
/// family; values are attached later (boundary-condition sampling).
struct BoundaryGroup {
  std::string name;
  Tensor points;  // [m, 2]
  Tensor values;  // [m, k] or empty
};

struct CollocationSet {
  Tensor interior;  // [n, 2]
  std::vector<BoundaryGroup> boundary_groups;
};

// ---------------------------------------------------------------------------
// Five-vertex polygon: vertex k is drawn inside the disk of radius 0.25
// around anchor k, the anchors being a regular pentagon of circumradius 1
// rotated by a per-sample angle.

struct PolygonDomain {
  std::array<Vec2, 5> vertices;  // counterclockwise
  double anchor_rotation = 0.0;

  Vec2 anchor(int k) const {
    const double a = 2.0 * kPi * k / 5.0 + anchor_rotation;
    return {std::cos(a), std::sin(a)};
  }

  double area() const {
    double a = 0.0;
    for (int i = 0; i < 5; ++i) {
      const Vec2 p = vertices[i], q = vertices[(i + 1) % 5];
      a += cross(p, q);
    }
    return 0.5 * a;
  }

  double perimeter() const {
    double p = 0.0;
    for (int i = 0; i < 5; ++i) p += norm(vertices[(i + 1) % 5] - vertices[i]);
    return p;
  }

  double diameter() const {
    double d = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) d = std::max(d, norm(vertices[i] - vertices[j]));
    return d;
  }

  bool is_simple() const {
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) {
        if (j == i + 1 || (i == 0 && j == 4)) continue;  // adjacent edges share a vertex
        if (segments_intersect(vertices[i], vertices[(i + 1) % 5], vertices[j],
                               vertices[(j + 1) % 5]))
          return false;
      }
    return true;
  }

  bool contains(Vec2 p) const {
    // Even-odd ray cast.
    bool inside = false;
    for (int i = 0; i < 5; ++i) {
      const Vec2 a = vertices[i], b = vertices[(i + 1) % 5];
      if ((a.y > p.y) != (b.y > p.y)) {
        const double xi = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
        if (p.x < xi) inside = !inside;
      }
    }
    return inside;
  }

  double boundary_distance(Vec2 p) const {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 5; ++i)
      d = std::min(d, norm(p - closest_on_segment(p, vertices[i], vertices[(i + 1) % 5])));
    return d;
  }

  Vec2 nearest_boundary_point(Vec2 p) const {
    double best = std::numeric_limits<double>::infinity();
    Vec2 out = vertices[0];
    for (int i = 0; i < 5; ++i) {
      const Vec2 c = closest_on_segment(p, vertices[i], vertices[(i + 1) % 5]);
      const double d = norm(p - c);
      if (d < best) {
        best = d;
        out = c;
      }
    }
    return out;
  }

  /// Arc-length coordinate (in [0, perimeter)) of a point assumed to lie on
  /// the boundary; off-boundary points are projected first.
  double arc_coordinate(Vec2 p) const {
    double best = std::numeric_limits<double>::infinity();
    double arc = 0.0, acc = 0.0;
    for (int i = 0; i < 5; ++i) {
      const Vec2 a = vertices[i], b = vertices[(i + 1) % 5];
      const Vec2 c = closest_on_segment(p, a, b);
      const double d = norm(p - c);
      if (d < best) {
        best = d;
        arc = acc + norm(c - a);
      }
      acc += norm(b - a);
    }
    return arc;
  }

  Tensor parametric() const {
    Tensor t(Shape{1, 10});
    for (int k = 0; k < 5; ++k) {
      t.data[2 * k] = vertices[k].x;
      t.data[2 * k + 1] = vertices[k].y;
    }
    return t;
  }
};

inline PolygonDomain sample_polygon_domain(Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PolygonDomain d;
    d.anchor_rotation = rng.uniform(0.0, 2.0 * kPi);
    for (int k = 0; k < 5; ++k) {
      const double r = 0.25 * std::sqrt(rng.uniform());
      const double a = rng.uniform(0.0, 2.0 * kPi);
      d.vertices[k] = d.anchor(k) + Vec2{r * std::cos(a), r * std::sin(a)};
    }
    if (d.is_simple() && d.area() > 0.0) return d;
  }
  throw std::runtime_error("sample_polygon_domain: no simple polygon after 1000 attempts");
}

// ---------------------------------------------------------------------------
// 20 mm x 20 mm plate with four circular holes.

struct Hole {
  Vec2 center;
  double radius = 0.0;
};

enum class Variation { kLow, kHigh };

struct PlateDomain {
  double half_width = 10.0;
  std::array<Hole, 4> holes;

  double diameter() const { return 2.0 * half_width * std::sqrt(2.0); }

  bool contains(Vec2 p) const {
    if (std::fabs(p.x) >= half_width || std::fabs(p.y) >= half_width) return false;
    for (const auto& h : holes)
      if (norm(p - h.center) <= h.radius) return false;
    return true;
  }

  /// Distance to the nearest boundary feature (outer edges and hole
  /// circles).  In overlapping-hole configurations a feature point may be
  /// swallowed by another hole; the feature distance is then a lower bound
  /// on the distance to the actual boundary, which is what the sphere walks
  /// require.
  double boundary_distance(Vec2 p) const {
    const double hw = half_width;
    const std::array<Vec2, 4> corners{Vec2{-hw, -hw}, Vec2{hw, -hw}, Vec2{hw, hw}, Vec2{-hw, hw}};
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i)
      d = std::min(d, norm(p - closest_on_segment(p, corners[i], corners[(i + 1) % 4])));
    for (const auto& h : holes) d = std::min(d, std::fabs(norm(p - h.center) - h.radius));
    return d;
  }

  Vec2 nearest_boundary_point(Vec2 p) const {
    const double hw = half_width;
    const std::array<Vec2, 4> corners{Vec2{-hw, -hw}, Vec2{hw, -hw}, Vec2{hw, hw}, Vec2{-hw, hw}};
    double best = std::numeric_limits<double>::infinity();
    Vec2 out{hw, hw};
    for (int i = 0; i < 4; ++i) {
      const Vec2 c = closest_on_segment(p, corners[i], corners[(i + 1) % 4]);
      if (const double d = norm(p - c); d < best) {
        best = d;
        out = c;
      }
    }
    for (const auto& h : holes) {
      Vec2 r = p - h.center;
      const double len = norm(r);
      const Vec2 on = len > 0 ? h.center + (h.radius / len) * r : h.center + Vec2{h.radius, 0.0};
      if (const double d = std::fabs(len - h.radius); d < best) {
        best = d;
        out = on;
      }
    }
    return out;
  }

  Tensor parametric() const {
    Tensor t(Shape{1, 12});
    for (int k = 0; k < 4; ++k) {
      t.data[3 * k] = holes[k].center.x;
      t.data[3 * k + 1] = holes[k].center.y;
      t.data[3 * k + 2] = holes[k].radius;
    }
    return t;
  }
};

inline PlateDomain sample_plate_domain(Rng& rng, Variation variation) {
  PlateDomain d;
  if (variation == Variation::kLow) {
    const std::array<Vec2, 4> anchors{Vec2{5, 5}, Vec2{5, -5}, Vec2{-5, 5}, Vec2{-5, -5}};
    for (int k = 0; k < 4; ++k) {
      const double r = 1.5 * std::sqrt(rng.uniform());
      const double a = rng.uniform(0.0, 2.0 * kPi);
      d.holes[k].center = anchors[k] + Vec2{r * std::cos(a), r * std::sin(a)};
      d.holes[k].radius = rng.uniform(0.8, 1.5);
    }
  } else {
    // Any radius and placement, as long as no hole protrudes beyond the
    // outer edges; overlap is allowed.
    for (int k = 0; k < 4; ++k) {
      const double r = rng.uniform(0.5, 4.0);
      d.holes[k].radius = r;
      d.holes[k].center = {rng.uniform(-(d.half_width - r), d.half_width - r),
                           rng.uniform(-(d.half_width - r), d.half_width - r)};
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Disk: verification domain for the sphere-walk oracle.

struct DiskDomain {
  Vec2 center;
  double radius = 1.0;

  bool contains(Vec2 p) const { return norm(p - center) < radius; }
  double boundary_distance(Vec2 p) const { return std::fabs(radius - norm(p - center)); }
  double diameter() const { return 2.0 * radius; }
  Vec2 nearest_boundary_point(Vec2 p) const {
    Vec2 r = p - center;
    const double len = norm(r);
    return len > 0 ? center + (radius / len) * r : center + Vec2{radius, 0.0};
  }
};

// ---------------------------------------------------------------------------
// Collocation sampling.

template <typename Domain>
Tensor sample_interior(const Domain& dom, std::size_t n, Rng& rng, Vec2 lo, Vec2 hi) {
  if (n == 0) throw std::invalid_argument("sample_interior: n must be positive");
  Tensor out(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      Vec2 p{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y)};
      if (dom.contains(p)) {
        out.at(i, 0) = p.x;
        out.at(i, 1) = p.y;
        placed = true;
        break;
      }
    }
    if (!placed)
      throw std::runtime_error("sample_interior: rejection sampling failed after 10000 attempts");
  }
  return out;
}

inline Tensor sample_interior(const PolygonDomain& dom, std::size_t n, Rng& rng) {
  Vec2 lo{1e30, 1e30}, hi{-1e30, -1e30};
  for (const auto& v : dom.vertices) {
    lo.x = std::min(lo.x, v.x);
    lo.y = std::min(lo.y, v.y);
    hi.x = std::max(hi.x, v.x);
    hi.y = std::max(hi.y, v.y);
  }
  return sample_interior(dom, n, rng, lo, hi);
}

inline Tensor sample_interior(const PlateDomain& dom, std::size_t n, Rng& rng) {
  return sample_interior(dom, n, rng, {-dom.half_width, -dom.half_width},
                         {dom.half_width, dom.half_width});
}

/// n points spread uniformly in arc length over the whole polygon boundary,
/// returned in traversal order (single group, the entire boundary carries
/// Dirichlet data).
inline std::vector<BoundaryGroup> sample_boundary(const PolygonDomain& dom, std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample_boundary: n must be positive");
  const double perim = dom.perimeter();
  Tensor pts(Shape{n, 2});
  for (std::size_t j = 0; j < n; ++j) {
    double s = (static_cast<double>(j) + 0.5) * perim / static_cast<double>(n);
    for (int e = 0; e < 5; ++e) {
      const Vec2 a = dom.vertices[e], b = dom.vertices[(e + 1) % 5];
      const double len = norm(b - a);
      if (s <= len || e == 4) {
        const double t = std::min(s / len, 1.0);
        pts.at(j, 0) = a.x + t * (b.x - a.x);
        pts.at(j, 1) = a.y + t * (b.y - a.y);
        break;
      }
      s -= len;
    }
  }
  return {BoundaryGroup{"bc", std::move(pts), Tensor{}}};
}

/// Plate boundary groups: TB (top and bottom edges), L (x = -hw),
/// R (x = +hw), H (the four hole circles).  Counts are per group.
inline std::vector<BoundaryGroup> sample_boundary(const PlateDomain& dom, std::size_t n_tb,
                                                  std::size_t n_l, std::size_t n_r,
                                                  std::size_t n_h) {
  if (n_tb == 0 || n_l == 0 || n_r == 0 || n_h == 0)
    throw std::invalid_argument("sample_boundary: group sizes must be positive");
  const double hw = dom.half_width;

  auto edge_points = [&](std::size_t m, bool horizontal, double fixed) {
    std::vector<Vec2> pts(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double t = -hw + (static_cast<double>(j) + 0.5) * (2.0 * hw) / static_cast<double>(m);
      pts[j] = horizontal ? Vec2{t, fixed} : Vec2{fixed, t};
    }
    return pts;
  };

  const std::size_t n_top = n_tb / 2, n_bot = n_tb - n_top;
  Tensor tb(Shape{n_tb, 2});
  {
    std::size_t r = 0;
    for (const Vec2& p : edge_points(n_top, true, hw)) {
      tb.at(r, 0) = p.x;
      tb.at(r, 1) = p.y;
      ++r;
    }
    for (const Vec2& p : edge_points(n_bot, true, -hw)) {
      tb.at(r, 0) = p.x;
      tb.at(r, 1) = p.y;
      ++r;
    }
  }
  Tensor left(Shape{n_l, 2}), right(Shape{n_r, 2});
  {
    std::size_t r = 0;
    for (const Vec2& p : edge_points(n_l, false, -hw)) {
      left.at(r, 0) = p.x;
      left.at(r, 1) = p.y;
      ++r;
    }
    r = 0;
    for (const Vec2& p : edge_points(n_r, false, hw)) {
      right.at(r, 0) = p.x;
      right.at(r, 1) = p.y;
      ++r;
    }
  }
  Tensor hole_pts(Shape{n_h, 2});
  {
    std::size_t r = 0;
    for (int k = 0; k < 4; ++k) {
      const std::size_t m = n_h / 4 + (static_cast<std::size_t>(k) < n_h % 4 ? 1 : 0);
      for (std::size_t j = 0; j < m; ++j) {
        const double a = (static_cast<double>(j) + 0.5) * 2.0 * kPi / static_cast<double>(m);
        hole_pts.at(r, 0) = dom.holes[k].center.x + dom.holes[k].radius * std::cos(a);
        hole_pts.at(r, 1) = dom.holes[k].center.y + dom.holes[k].radius * std::sin(a);
        ++r;
      }
    }
  }
  std::vector<BoundaryGroup> groups;
  groups.push_back({"TB", std::move(tb), Tensor{}});
  groups.push_back({"L", std::move(left), Tensor{}});
  groups.push_back({"R", std::move(right), Tensor{}});
  groups.push_back({"H", std::move(hole_pts), Tensor{}});
  return groups;
}

}  // namespace pino
