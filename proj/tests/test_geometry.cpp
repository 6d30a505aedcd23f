#include <doctest.h>

#include <cmath>

#include "pino/geometry.hpp"
#include "pino/rng.hpp"

using namespace pino;

namespace {

PolygonDomain regular_pentagon(double rotation) {
  PolygonDomain d;
  d.anchor_rotation = rotation;
  for (int k = 0; k < 5; ++k) d.vertices[k] = d.anchor(k);
  return d;
}

}  // namespace

TEST_CASE("regular pentagon: center membership and apothem") {
  PolygonDomain d = regular_pentagon(kPi / 10.0);
  CHECK(d.contains({0.0, 0.0}));
  CHECK(d.boundary_distance({0.0, 0.0}) == doctest::Approx(std::cos(kPi / 5.0)).epsilon(1e-12));
  CHECK(d.area() > 0.0);
}

TEST_CASE("sampled polygons satisfy their construction invariants") {
  Rng rng(101);
  for (int s = 0; s < 1000; ++s) {
    Rng r = rng.child({static_cast<std::uint64_t>(s)});
    PolygonDomain d = sample_polygon_domain(r);
    for (int k = 0; k < 5; ++k) CHECK(norm(d.vertices[k] - d.anchor(k)) <= 0.25 + 1e-12);
    CHECK(d.is_simple());
    CHECK(d.area() > 0.0);
    Vec2 centroid{0, 0};
    for (const auto& v : d.vertices) centroid = centroid + 0.2 * v;
    CHECK(d.contains(centroid));
  }
}

TEST_CASE("plate membership and boundary distance") {
  PlateDomain d;
  d.holes = {Hole{{5, 5}, 1.0}, Hole{{5, -5}, 1.0}, Hole{{-5, 5}, 1.0}, Hole{{-5, -5}, 1.0}};
  CHECK_FALSE(d.contains({5, 5}));
  CHECK(d.contains({0, 0}));
  CHECK(d.boundary_distance({0, 0}) ==
        doctest::Approx(std::sqrt(50.0) - 1.0).epsilon(1e-12));
  // Maximal holes of the low-variation family.
  PlateDomain big;
  big.holes = {Hole{{5, 5}, 1.5}, Hole{{5, -5}, 1.5}, Hole{{-5, 5}, 1.5}, Hole{{-5, -5}, 1.5}};
  CHECK(big.contains({0, 0}));
  CHECK_FALSE(big.contains({5.0, 6.4}));
}

TEST_CASE("plate sampling honors the variation modes") {
  Rng rng(55);
  const std::array<Vec2, 4> anchors{Vec2{5, 5}, Vec2{5, -5}, Vec2{-5, 5}, Vec2{-5, -5}};
  for (int s = 0; s < 200; ++s) {
    Rng r = rng.child({static_cast<std::uint64_t>(s)});
    PlateDomain low = sample_plate_domain(r, Variation::kLow);
    for (int k = 0; k < 4; ++k) {
      CHECK(low.holes[k].radius >= 0.8);
      CHECK(low.holes[k].radius <= 1.5);
      CHECK(norm(low.holes[k].center - anchors[k]) <= 1.5 + 1e-12);
    }
    PlateDomain high = sample_plate_domain(r, Variation::kHigh);
    for (const auto& h : high.holes) {
      CHECK(h.center.x - h.radius >= -high.half_width - 1e-12);
      CHECK(h.center.x + h.radius <= high.half_width + 1e-12);
      CHECK(h.center.y - h.radius >= -high.half_width - 1e-12);
      CHECK(h.center.y + h.radius <= high.half_width + 1e-12);
    }
  }
}

TEST_CASE("interior samples pass membership") {
  Rng rng(7);
  PolygonDomain poly = sample_polygon_domain(rng);
  Tensor pts = sample_interior(poly, 200, rng);
  for (std::size_t i = 0; i < 200; ++i) CHECK(poly.contains({pts.at(i, 0), pts.at(i, 1)}));

  PlateDomain plate = sample_plate_domain(rng, Variation::kLow);
  Tensor pp = sample_interior(plate, 200, rng);
  for (std::size_t i = 0; i < 200; ++i) CHECK(plate.contains({pp.at(i, 0), pp.at(i, 1)}));
}

TEST_CASE("interior rejection bound errors on an empty domain") {
  PlateDomain d;
  for (auto& h : d.holes) h = Hole{{0, 0}, 9.99};
  d.holes[1].center = {9, 9};
  d.holes[1].radius = 0.5;  // keep parametric sane; square is still covered
  d.holes[0].radius = 15.0;
  Rng rng(1);
  CHECK_THROWS_AS((void)sample_interior(d, 1, rng), std::runtime_error);
}

TEST_CASE("boundary groups lie on their segments") {
  Rng rng(13);
  PolygonDomain poly = sample_polygon_domain(rng);
  auto groups = sample_boundary(poly, 100);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].name == "bc");
  for (std::size_t i = 0; i < 100; ++i)
    CHECK(poly.boundary_distance({groups[0].points.at(i, 0), groups[0].points.at(i, 1)}) <= 1e-9);

  PlateDomain plate = sample_plate_domain(rng, Variation::kLow);
  auto pg = sample_boundary(plate, 40, 20, 20, 40);
  REQUIRE(pg.size() == 4);
  CHECK(pg[1].name == "L");
  for (std::size_t i = 0; i < pg[1].points.shape[0]; ++i)
    CHECK(pg[1].points.at(i, 0) == -10.0);
  CHECK(pg[2].name == "R");
  for (std::size_t i = 0; i < pg[2].points.shape[0]; ++i) CHECK(pg[2].points.at(i, 0) == 10.0);
  for (const auto& g : pg)
    for (std::size_t i = 0; i < g.points.shape[0]; ++i)
      CHECK(plate.boundary_distance({g.points.at(i, 0), g.points.at(i, 1)}) <= 1e-9);
  CHECK_THROWS_AS((void)sample_boundary(plate, 0, 1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_boundary(poly, 0), std::invalid_argument);
}

TEST_CASE("empty ball property: no boundary point closer than the reported distance") {
  Rng rng(23);
  PolygonDomain poly = sample_polygon_domain(rng);
  auto dense = sample_boundary(poly, 4000)[0].points;
  Tensor queries = sample_interior(poly, 50, rng);
  for (std::size_t i = 0; i < 50; ++i) {
    const Vec2 p{queries.at(i, 0), queries.at(i, 1)};
    const double bd = poly.boundary_distance(p);
    CHECK(bd > 0.0);
    double nearest = 1e30;
    for (std::size_t j = 0; j < dense.shape[0]; ++j)
      nearest = std::min(nearest, norm(p - Vec2{dense.at(j, 0), dense.at(j, 1)}));
    CHECK(nearest >= bd - 1e-9);
  }
}

TEST_CASE("parametric representations have the documented widths") {
  Rng rng(3);
  CHECK(sample_polygon_domain(rng).parametric().shape == Shape{1, 10});
  CHECK(sample_plate_domain(rng, Variation::kLow).parametric().shape == Shape{1, 12});
}
