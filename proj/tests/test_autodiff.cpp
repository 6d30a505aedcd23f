#include <doctest.h>

#include <cmath>
#include <vector>

#include "pino/rng.hpp"
#include "pino/tape.hpp"
#include "support/finite_diff.hpp"

using namespace pino;
using testsupport::central_diff;
using testsupport::rel_err;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

// Two-layer tanh network evaluated without any tape: loss oracle for the
// finite-difference checks.  params = {W1 [d,h], b1 [h], W2 [h,1], b2 [1]}.
double mlp_loss_plain(const std::vector<Tensor>& params, const Tensor& x) {
  const Tensor &W1 = params[0], &b1 = params[1], &W2 = params[2], &b2 = params[3];
  const std::size_t n = x.shape[0], d = x.shape[1], h = W1.shape[1];
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double out = b2.data[0];
    for (std::size_t k = 0; k < h; ++k) {
      double z = b1.data[k];
      for (std::size_t j = 0; j < d; ++j) z += x.at(i, j) * W1.at(j, k);
      out += std::tanh(z) * W2.at(k, 0);
    }
    loss += out * out;
  }
  return loss / static_cast<double>(n);
}

Var mlp_forward(Tape& t, const std::vector<Var>& params, Var x) {
  Var h = tanh(add(matmul(x, params[0]), repeat_rows(params[1], t.value(x).shape[0])));
  Var out = add(matmul(h, params[2]), repeat_rows(params[3], t.value(x).shape[0]));
  return reshape(out, Shape{t.value(x).shape[0]});
}

}  // namespace

TEST_CASE("primitive op examples") {
  Tape t;
  Var z = t.constant(Tensor::scalar(0.0));
  CHECK(t.value(tanh(z)).data[0] == 0.0);

  Tensor rows(Shape{3, 4});
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < 3; ++i) rows.at(i, j) = 0.1 * (j + 1) + 0.7;
  Var m = t.constant(rows);
  Tensor pooled = t.value(mean_pool(m, 0));
  for (std::size_t j = 0; j < 4; ++j) CHECK(pooled.data[j] == rows.at(0, j));

  Var mm = t.constant(Tensor(Shape{2, 2}, {1, 5, 3, 2}));
  Tensor mx = t.value(max_pool(mm, 0));
  CHECK(mx.data[0] == 3.0);
  CHECK(mx.data[1] == 5.0);
  Tensor mn = t.value(min_pool(mm, 0));
  CHECK(mn.data[0] == 1.0);
  CHECK(mn.data[1] == 2.0);
}

TEST_CASE("shape mismatch errors name both shapes") {
  Tape t;
  Var a = t.constant(Tensor::zeros(Shape{2, 3}));
  Var b = t.constant(Tensor::zeros(Shape{3, 3}));
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(matmul(a, a), doctest::Contains("[2,3]"), std::invalid_argument);
}

TEST_CASE("gradient of a linear map replicates the fixed operand") {
  Tape t;
  Tensor xv(Shape{3, 1}, {0.5, -1.25, 2.0});
  Var W = t.input(Tensor(Shape{2, 3}, {1, 2, 3, 4, 5, 6}));
  Var x = t.constant(xv);
  Var loss = sum(matmul(W, x));
  Tensor g = t.value(t.gradient(loss, W));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(g.at(i, j) == xv.data[j]);
}

TEST_CASE("gradient of a constant path is zero") {
  Tape t;
  Var W = t.input(Tensor::ones(Shape{2, 2}));
  Var c = t.constant(Tensor::scalar(3.0));
  Var loss = mul(c, c);
  Tensor g = t.value(t.gradient(loss, W));
  for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("non-scalar loss rejected") {
  Tape t;
  Var W = t.input(Tensor::ones(Shape{2}));
  CHECK_THROWS_AS((void)t.gradient(W, W), std::invalid_argument);
}

TEST_CASE("parameter gradients match central finite differences") {
  Rng rng(20240601);
  for (int trial = 0; trial < 10; ++trial) {
    Rng r = rng.child({static_cast<std::uint64_t>(trial)});
    const std::size_t h = 6;
    std::vector<Tensor> params = {random_tensor({2, h}, r, 0.8), random_tensor({h}, r, 0.3),
                                  random_tensor({h, 1}, r, 0.8), random_tensor({1}, r, 0.3)};
    Tensor x = random_tensor({5, 2}, r);

    Tape t;
    std::vector<Var> pv;
    for (auto& p : params) pv.push_back(t.input(p));
    Var xs = t.constant(x);
    Var loss = mean(square(mlp_forward(t, pv, xs)));
    auto grads = t.gradient_multi(loss, pv);

    auto oracle = central_diff(
        [&](const std::vector<Tensor>& ps) { return mlp_loss_plain(ps, x); }, params, 1e-5);
    for (std::size_t p = 0; p < params.size(); ++p)
      CHECK(rel_err(t.value(grads[p]), oracle[p]) <= 1e-5);
  }
}

TEST_CASE("spatial derivative examples") {
  // u = x^2 -> u_xx = 2 everywhere.
  Tape t;
  Tensor xv(Shape{4, 1}, {-1.5, 0.0, 0.25, 3.0});
  Var x = t.input(xv);
  Var u = square(column(x, 0));
  Tensor uxx = t.value(spatial_derivs(u, x, 2, 0));
  for (double v : uxx.data) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));

  // u = tanh(x) -> u_x(0) = 1.
  Tape t2;
  Var x2 = t2.input(Tensor(Shape{1, 1}, {0.0}));
  Var u2 = tanh(column(x2, 0));
  CHECK(t2.value(spatial_derivs(u2, x2, 1, 0)).data[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("spatial derivative argument errors") {
  Tape t;
  Var x = t.input(Tensor::zeros(Shape{3, 2}));
  Var u = square(column(x, 0));
  CHECK_THROWS_AS((void)spatial_derivs(u, x, 3, 0), std::invalid_argument);
  Var xc = t.constant(Tensor::zeros(Shape{3, 2}));
  Var uc = square(column(xc, 0));
  CHECK_THROWS_AS((void)spatial_derivs(uc, xc, 1, 0), std::invalid_argument);
}

TEST_CASE("second spatial derivatives of an MLP match finite differences") {
  Rng rng(77);
  const std::size_t h = 8;
  std::vector<Tensor> params = {random_tensor({2, h}, rng, 0.7), random_tensor({h}, rng, 0.3),
                                random_tensor({h, 1}, rng, 0.7), random_tensor({1}, rng, 0.3)};

  auto point_eval = [&](double px, double py) {
    Tensor x(Shape{1, 2}, {px, py});
    const Tensor &W1 = params[0], &b1 = params[1], &W2 = params[2], &b2 = params[3];
    double out = b2.data[0];
    for (std::size_t k = 0; k < h; ++k) {
      double z = b1.data[k] + px * W1.at(0, k) + py * W1.at(1, k);
      out += std::tanh(z) * W2.at(k, 0);
    }
    return out;
  };

  Tensor xv(Shape{3, 2}, {0.3, -0.4, -1.1, 0.9, 0.05, 0.6});
  Tape t;
  std::vector<Var> pv;
  for (auto& p : params) pv.push_back(t.input(p));
  Var x = t.input(xv);
  Var u = mlp_forward(t, pv, x);

  Tensor uxx = t.value(spatial_derivs(u, x, 2, 0));
  Tensor uyy = t.value(spatial_derivs(u, x, 2, 1));
  Tensor uxy = t.value(spatial_derivs(u, x, 2, 0, 1));

  const double fd_h = 1e-4;
  for (std::size_t i = 0; i < 3; ++i) {
    const double px = xv.at(i, 0), py = xv.at(i, 1);
    const double fxx =
        (point_eval(px + fd_h, py) - 2 * point_eval(px, py) + point_eval(px - fd_h, py)) /
        (fd_h * fd_h);
    const double fyy =
        (point_eval(px, py + fd_h) - 2 * point_eval(px, py) + point_eval(px, py - fd_h)) /
        (fd_h * fd_h);
    const double fxy = (point_eval(px + fd_h, py + fd_h) - point_eval(px + fd_h, py - fd_h) -
                        point_eval(px - fd_h, py + fd_h) + point_eval(px - fd_h, py - fd_h)) /
                       (4 * fd_h * fd_h);
    CHECK(std::fabs(uxx.data[i] - fxx) / std::max(1.0, std::fabs(fxx)) <= 1e-4);
    CHECK(std::fabs(uyy.data[i] - fyy) / std::max(1.0, std::fabs(fyy)) <= 1e-4);
    CHECK(std::fabs(uxy.data[i] - fxy) / std::max(1.0, std::fabs(fxy)) <= 1e-4);
  }
}

TEST_CASE("nested differentiation: parameter gradient of a squared-derivative loss") {
  Rng rng(123);
  const std::size_t h = 5;
  std::vector<Tensor> params = {random_tensor({2, h}, rng, 0.6), random_tensor({h}, rng, 0.3),
                                random_tensor({h, 1}, rng, 0.6), random_tensor({1}, rng, 0.3)};
  Tensor xv(Shape{4, 2}, {0.2, 0.1, -0.5, 0.4, 0.9, -0.3, -0.2, -0.8});

  auto loss_of = [&](const std::vector<Tensor>& ps) {
    Tape t;
    std::vector<Var> pv;
    for (auto& p : ps) pv.push_back(t.input(p));
    Var x = t.input(xv);
    Var u = mlp_forward(t, pv, x);
    Var uxx = spatial_derivs(u, x, 2, 0);
    return t.value(mean(square(uxx))).data[0];
  };

  Tape t;
  std::vector<Var> pv;
  for (auto& p : params) pv.push_back(t.input(p));
  Var x = t.input(xv);
  Var u = mlp_forward(t, pv, x);
  Var loss = mean(square(spatial_derivs(u, x, 2, 0)));
  auto grads = t.gradient_multi(loss, pv);

  auto oracle = central_diff(loss_of, params, 1e-5);
  for (std::size_t p = 0; p < params.size(); ++p)
    CHECK(rel_err(t.value(grads[p]), oracle[p]) <= 1e-4);
}

TEST_CASE("pooling permutation invariance is exact") {
  Rng rng(9);
  Tensor a = random_tensor({7, 5}, rng);
  std::vector<std::size_t> perm{3, 0, 6, 2, 5, 1, 4};
  Tensor b(Shape{7, 5});
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 5; ++j) b.at(i, j) = a.at(perm[i], j);

  Tape t;
  Var va = t.constant(a), vb = t.constant(b);
  CHECK(t.value(mean_pool(va, 0)) == t.value(mean_pool(vb, 0)));
  CHECK(t.value(max_pool(va, 0)) == t.value(max_pool(vb, 0)));
  CHECK(t.value(min_pool(va, 0)) == t.value(min_pool(vb, 0)));
}

TEST_CASE("extreme pooling routes gradient to the lowest tied index") {
  Tape t;
  Var x = t.input(Tensor(Shape{3}, {2.0, 5.0, 5.0}));
  Var y = max_pool(x, 0);
  Tensor g = t.value(t.gradient(y, x));
  CHECK(g.data[0] == 0.0);
  CHECK(g.data[1] == 1.0);
  CHECK(g.data[2] == 0.0);
}

TEST_CASE("tape replay reproduces cached values bitwise") {
  Rng rng(4242);
  Tape t;
  Var a = t.input(random_tensor({6, 3}, rng));
  Var b = t.input(random_tensor({3, 6}, rng));
  Var c = tanh(matmul(a, b));
  Var loss = mean(square(c));
  (void)t.gradient(loss, a);
  CHECK(t.replay_matches());
}

TEST_CASE("two identical forward passes are bitwise identical") {
  Rng rng(31337);
  Tensor w = random_tensor({4, 4}, rng);
  Tensor x = random_tensor({5, 4}, rng);
  auto run = [&]() {
    Tape t;
    Var vw = t.input(w);
    Var vx = t.constant(x);
    return t.value(mean(square(tanh(matmul(vx, vw)))));
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite values are an error surface") {
  Tape t;
  Var big = t.constant(Tensor::full(Shape{2}, 1e308));
  CHECK_THROWS_AS((void)add(big, big), std::runtime_error);
  Tensor bad(Shape{1});
  bad.data[0] = std::nan("");
  CHECK_THROWS_AS((void)t.constant(bad), std::runtime_error);
}
