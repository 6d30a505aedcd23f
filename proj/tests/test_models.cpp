#include <doctest.h>

#include <cmath>

#include "pino/models.hpp"
#include "pino/rng.hpp"

using namespace pino;

namespace {

Tensor random_rows(std::size_t n, std::size_t d, Rng& rng) {
  Tensor t(Shape{n, d});
  for (auto& v : t.data) v = rng.normal();
  return t;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
  Tensor out(t.shape);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) out.at(i, j) = t.at(perm[i], j);
  return out;
}

ModelConfig small_gano() {
  ModelConfig c;
  c.kind = ModelKind::kGano;
  c.width = 8;
  c.geo_width = 8;
  return c;
}

}  // namespace

TEST_CASE("branch encoder: duplication and permutation invariance") {
  ModelConfig c = small_gano();
  ModelState state = init_model(c, 11);
  Rng rng(5);
  Tensor one = random_rows(1, 3, rng);
  Tensor five(Shape{5, 3});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) five.at(i, j) = one.at(0, j);

  Tape t;
  BoundModel m = bind_model(t, state);
  CHECK(t.value(encode_parameters(t, m, one)) == t.value(encode_parameters(t, m, five)));

  Tensor rows = random_rows(6, 3, rng);
  Tensor perm = permute_rows(rows, {4, 2, 0, 5, 1, 3});
  CHECK(t.value(encode_parameters(t, m, rows)) == t.value(encode_parameters(t, m, perm)));

  // Distinct BC values on the same points give (generically) distinct b.
  Tensor rows2 = rows;
  for (std::size_t i = 0; i < 6; ++i) rows2.at(i, 2) += 0.7 + 0.1 * static_cast<double>(i);
  Tensor b1 = t.value(encode_parameters(t, m, rows));
  Tensor b2 = t.value(encode_parameters(t, m, rows2));
  double diff = 0.0;
  for (std::size_t i = 0; i < b1.size(); ++i) diff += std::fabs(b1.data[i] - b2.data[i]);
  CHECK(diff > 1e-8);

  CHECK_THROWS_AS((void)encode_parameters(t, m, Tensor(Shape{0, 3})), std::invalid_argument);
}

TEST_CASE("geometry encoder: identical points, permutations, distinct domains") {
  ModelConfig c = small_gano();
  ModelState state = init_model(c, 3);
  Rng rng(17);
  Tensor single = random_rows(1, 2, rng);
  Tensor copies(Shape{4, 2});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) copies.at(i, j) = single.at(0, j);

  Tape t;
  BoundModel m = bind_model(t, state);
  CHECK(t.value(encode_geometry(t, m, single)) == t.value(encode_geometry(t, m, copies)));

  Tensor pts = random_rows(7, 2, rng);
  CHECK(t.value(encode_geometry(t, m, pts)) ==
        t.value(encode_geometry(t, m, permute_rows(pts, {6, 5, 4, 3, 2, 1, 0}))));

  Tensor other = random_rows(7, 2, rng);
  Tensor g1 = t.value(encode_geometry(t, m, pts));
  Tensor g2 = t.value(encode_geometry(t, m, other));
  double diff = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) diff += std::fabs(g1.data[i] - g2.data[i]);
  CHECK(diff > 1e-8);

  CHECK_THROWS_AS((void)encode_geometry(t, m, Tensor(Shape{0, 2})), std::invalid_argument);
}

TEST_CASE("dcon ignores geometry; the geometry-aware forward does not") {
  Rng rng(23);
  Tensor branch = random_rows(9, 3, rng);
  Tensor geo_a = random_rows(12, 2, rng);
  Tensor geo_b = random_rows(12, 2, rng);
  Tensor x = random_rows(5, 2, rng);

  for (int seed = 0; seed < 20; ++seed) {
    ModelConfig dc = small_gano();
    dc.kind = ModelKind::kDcon;
    ModelState dstate = init_model(dc, static_cast<std::uint64_t>(seed));
    Tape t1, t2;
    BoundModel m1 = bind_model(t1, dstate);
    BoundModel m2 = bind_model(t2, dstate);
    Var b1 = encode_parameters(t1, m1, branch);
    Var b2 = encode_parameters(t2, m2, branch);
    // Two distinct domains, equal (x, b): identical predictions, exactly.
    CHECK(t1.value(dcon_forward(t1, m1, t1.constant(x), b1)[0]) ==
          t2.value(dcon_forward(t2, m2, t2.constant(x), b2)[0]));

    ModelState gstate = init_model(small_gano(), static_cast<std::uint64_t>(seed));
    Tape g1, g2;
    BoundModel gm1 = bind_model(g1, gstate);
    BoundModel gm2 = bind_model(g2, gstate);
    Tensor ua = g1.value(gano_forward(g1, gm1, g1.constant(x), encode_parameters(g1, gm1, branch),
                                      encode_geometry(g1, gm1, geo_a))[0]);
    Tensor ub = g2.value(gano_forward(g2, gm2, g2.constant(x), encode_parameters(g2, gm2, branch),
                                      encode_geometry(g2, gm2, geo_b))[0]);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < ua.size(); ++i)
      max_diff = std::max(max_diff, std::fabs(ua.data[i] - ub.data[i]));
    CHECK(max_diff > 1e-12);
  }
}

TEST_CASE("forward is row-independent and order preserving") {
  Rng rng(31);
  ModelState state = init_model(small_gano(), 7);
  Tensor branch = random_rows(6, 3, rng);
  Tensor geo = random_rows(8, 2, rng);
  Tensor x = random_rows(4, 2, rng);

  Tape t;
  BoundModel m = bind_model(t, state);
  Var b = encode_parameters(t, m, branch);
  Var G = encode_geometry(t, m, geo);
  Tensor all = t.value(gano_forward(t, m, t.constant(x), b, G)[0]);
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor xi(Shape{1, 2}, {x.at(i, 0), x.at(i, 1)});
    Tensor ui = t.value(gano_forward(t, m, t.constant(xi), b, G)[0]);
    CHECK(ui.data[0] == all.data[i]);
  }
}

TEST_CASE("zero parameters produce zero output") {
  ModelConfig c = small_gano();
  c.kind = ModelKind::kDcon;
  ModelState state = init_model(c, 0);
  for (auto& [name, p] : state.params)
    for (auto& v : p.data) v = 0.0;
  Tape t;
  BoundModel m = bind_model(t, state);
  Var b = encode_parameters(t, m, Tensor::ones(Shape{3, 3}));
  Tensor u = t.value(dcon_forward(t, m, t.constant(Tensor::ones(Shape{2, 2})), b)[0]);
  CHECK(u.data[0] == 0.0);
  CHECK(u.data[1] == 0.0);
}

TEST_CASE("fusion variants and width validation") {
  Rng rng(41);
  Tensor branch = random_rows(4, 3, rng);
  Tensor geo = random_rows(5, 2, rng);
  Tensor x = random_rows(3, 2, rng);
  for (Fusion f : {Fusion::kConcat, Fusion::kAdd, Fusion::kMul}) {
    ModelConfig c = small_gano();
    c.fusion = f;
    ModelState state = init_model(c, 2);
    Tape t;
    BoundModel m = bind_model(t, state);
    auto out = gano_forward(t, m, t.constant(x), encode_parameters(t, m, branch),
                            encode_geometry(t, m, geo));
    CHECK(out.size() == 1);
    CHECK(t.value(out[0]).shape == Shape{3});
  }
  ModelConfig bad = small_gano();
  bad.fusion = Fusion::kAdd;
  bad.geo_width = 4;
  CHECK_THROWS_AS((void)init_model(bad, 0), std::invalid_argument);
}

TEST_CASE("pointnet: permutation equivariance and star zero-channel equivalence") {
  Rng rng(51);
  ModelConfig star;
  star.kind = ModelKind::kPointNetStar;
  star.width = 8;
  star.branch_dim = 3;  // (x, y, g)
  ModelState sstate = init_model(star, 9);

  Tensor cloud = random_rows(6, 2, rng);
  Tensor zeros(Shape{6, 1});

  // Same weights with the BC input rows of u1 removed give a plain PointNet
  // that must match the star variant on all-zero channels.
  ModelConfig plain;
  plain.kind = ModelKind::kPointNet;
  plain.width = 8;
  ModelState pstate = init_model(plain, 9);
  for (std::size_t i = 0; i < pstate.params.size(); ++i) {
    const auto& [name, sp] = sstate.params[i];
    auto& [pname, pp] = pstate.params[i];
    REQUIRE(pname == name);
    if (name == "u1.0.W") {
      for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t cidx = 0; cidx < pp.cols(); ++cidx) pp.at(r, cidx) = sp.at(r, cidx);
    } else {
      pp = sp;
    }
  }

  Tape t;
  BoundModel sm = bind_model(t, sstate);
  BoundModel pm = bind_model(t, pstate);
  Tensor u_star = t.value(pointnet_forward(t, sm, t.constant(cloud), &zeros)[0]);
  Tensor u_plain = t.value(pointnet_forward(t, pm, t.constant(cloud))[0]);
  CHECK(u_star == u_plain);

  // Permuting the cloud permutes the outputs identically.
  std::vector<std::size_t> perm{5, 3, 1, 0, 4, 2};
  Tensor shuffled = permute_rows(cloud, perm);
  Tensor u_perm = t.value(pointnet_forward(t, pm, t.constant(shuffled))[0]);
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(u_perm.data[i] == u_plain.data[perm[i]]);

  CHECK_THROWS_AS((void)pointnet_forward(t, pm, t.constant(Tensor(Shape{0, 2}))),
                  std::invalid_argument);
}

TEST_CASE("deeponet: dot-product definition and size freezing") {
  // q = 1 with crafted weights: branch emits b = [2], trunk emits t = [3].
  ModelConfig c;
  c.kind = ModelKind::kDeepOnet;
  c.width = 1;
  c.branch_layers = 1;
  c.operator_layers = 1;
  c.branch_size = 4;
  ModelState state = init_model(c, 0);
  for (auto& [name, p] : state.params)
    for (auto& v : p.data) v = 0.0;
  state.find("branch.0.B").data[0] = 2.0;
  state.find("trunk.0.B").data[0] = 3.0;

  Tape t;
  BoundModel m = bind_model(t, state);
  Tensor flat(Shape{4}, {0.5, -1.0, 2.0, 0.0});
  Tensor x(Shape{2, 2}, {0.1, 0.2, -0.3, 0.4});
  Tensor u = t.value(deeponet_forward(t, m, t.constant(x), flat)[0]);
  CHECK(u.data[0] == 6.0);
  CHECK(u.data[1] == 6.0);

  Tensor wrong(Shape{5});
  CHECK_THROWS_AS((void)deeponet_forward(t, m, t.constant(x), wrong), std::invalid_argument);

  // Fixed branch, varying x: outputs generically differ.
  ModelState rich = init_model(
      []{ ModelConfig cc; cc.kind = ModelKind::kDeepOnet; cc.width = 8; cc.branch_size = 4;
          return cc; }(), 77);
  Tape t2;
  BoundModel m2 = bind_model(t2, rich);
  Tensor u2 = t2.value(deeponet_forward(t2, m2, t2.constant(x), flat)[0]);
  CHECK(std::fabs(u2.data[0] - u2.data[1]) > 1e-12);
}

TEST_CASE("encoders accept any row count (discretization independence)") {
  ModelState state = init_model(small_gano(), 1);
  Tape t;
  BoundModel m = bind_model(t, state);
  Rng rng(2);
  for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{17}}) {
    Tensor rows = random_rows(n, 3, rng);
    Tensor pts = random_rows(n, 2, rng);
    CHECK(t.value(encode_parameters(t, m, rows)).shape == Shape{8});
    CHECK(t.value(encode_geometry(t, m, pts)).shape == Shape{8});
  }
}

TEST_CASE("every forward is twice differentiable in the coordinates") {
  Rng rng(66);
  Tensor branch = random_rows(5, 3, rng);
  Tensor geo = random_rows(6, 2, rng);
  Tensor xv = random_rows(4, 2, rng);

  {
    ModelState state = init_model(small_gano(), 4);
    Tape t;
    BoundModel m = bind_model(t, state);
    Var x = t.input(xv);
    Var u = gano_forward(t, m, x, encode_parameters(t, m, branch),
                         encode_geometry(t, m, geo))[0];
    CHECK(t.value(spatial_derivs(u, x, 2, 0)).all_finite());
  }
  {
    ModelConfig c = small_gano();
    c.kind = ModelKind::kPointNet;
    ModelState state = init_model(c, 4);
    Tape t;
    BoundModel m = bind_model(t, state);
    Var x = t.input(xv);
    Var u = pointnet_forward(t, m, x)[0];
    CHECK(t.value(spatial_derivs(u, x, 2, 1)).all_finite());
  }
  {
    ModelConfig c;
    c.kind = ModelKind::kDeepOnet;
    c.width = 8;
    c.branch_size = 5;
    ModelState state = init_model(c, 4);
    Tape t;
    BoundModel m = bind_model(t, state);
    Var x = t.input(xv);
    Tensor flat(Shape{5}, {1, 2, 3, 4, 5});
    Var u = deeponet_forward(t, m, x, flat)[0];
    CHECK(t.value(spatial_derivs(u, x, 2, 0, 1)).all_finite());
  }
}

TEST_CASE("two-wide output head splits at the last operator layer") {
  ModelConfig c = small_gano();
  c.out_dim = 2;
  ModelState state = init_model(c, 5);
  Rng rng(1);
  Tensor branch = random_rows(4, 3, rng);
  Tensor geo = random_rows(4, 2, rng);
  Tape t;
  BoundModel m = bind_model(t, state);
  auto uv = gano_forward(t, m, t.constant(random_rows(3, 2, rng)),
                         encode_parameters(t, m, branch), encode_geometry(t, m, geo));
  REQUIRE(uv.size() == 2);
  CHECK(t.value(uv[0]).shape == Shape{3});
  CHECK(t.value(uv[1]).shape == Shape{3});
  double diff = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    diff += std::fabs(t.value(uv[0]).data[i] - t.value(uv[1]).data[i]);
  CHECK(diff > 1e-12);
}
