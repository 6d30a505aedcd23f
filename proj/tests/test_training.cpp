#include <doctest.h>

#include <cmath>

#include "pino/dataset.hpp"
#include "pino/training.hpp"

using namespace pino;

namespace {

GenSettings tiny_darcy(std::size_t samples, std::uint64_t seed) {
  GenSettings g;
  g.problem = ProblemKind::kDarcy;
  g.samples = samples;
  g.seed = seed;
  g.boundary_points = 16;
  g.interior_points = 24;
  g.eval_points = 0;
  g.oracle_walks = 0;
  return g;
}

ModelConfig tiny_gano() {
  ModelConfig c;
  c.width = 8;
  c.geo_width = 8;
  c.branch_layers = 2;
  c.geo_layers = 2;
  return c;
}

}  // namespace

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ModelState m = init_model(tiny_gano(), 1);
  ModelState before = m;
  AdamState a = make_adam(m);
  std::vector<std::pair<std::string, Tensor>> grads;
  for (const auto& [name, p] : m.params) grads.emplace_back(name, Tensor::zeros(p.shape));
  adam_step(m, a, grads, 1e-3);
  for (std::size_t i = 0; i < m.params.size(); ++i)
    CHECK(m.params[i].second == before.params[i].second);
}

TEST_CASE("adam: hand-computed first step") {
  ModelConfig c = tiny_gano();
  ModelState m = init_model(c, 2);
  AdamState a = make_adam(m);
  const double g = 0.3, lr = 0.01;
  const double p0 = m.params[0].second.data[0];
  std::vector<std::pair<std::string, Tensor>> grads;
  for (const auto& [name, p] : m.params) grads.emplace_back(name, Tensor::zeros(p.shape));
  grads[0].second.data[0] = g;
  adam_step(m, a, grads, lr);
  // t = 1: bias-corrected m-hat = g, v-hat = g^2, update = -lr g / (|g| + eps).
  const double expect = p0 - lr * g / (std::fabs(g) + 1e-8);
  CHECK(m.params[0].second.data[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam: constant gradient converges to steps of lr magnitude") {
  ModelState m = init_model(tiny_gano(), 3);
  AdamState a = make_adam(m);
  std::vector<std::pair<std::string, Tensor>> grads;
  for (const auto& [name, p] : m.params) grads.emplace_back(name, Tensor::zeros(p.shape));
  grads[0].second.data[0] = -0.7;
  const double lr = 1e-3;
  double prev = m.params[0].second.data[0];
  double step = 0.0;
  for (int t = 0; t < 2000; ++t) {
    adam_step(m, a, grads, lr);
    step = m.params[0].second.data[0] - prev;
    prev = m.params[0].second.data[0];
  }
  CHECK(std::fabs(step) == doctest::Approx(lr).epsilon(0.05));
  CHECK(step > 0.0);  // moves against the negative gradient
}

TEST_CASE("adam: gradient errors are reported by name") {
  ModelState m = init_model(tiny_gano(), 4);
  AdamState a = make_adam(m);
  std::vector<std::pair<std::string, Tensor>> grads;
  for (const auto& [name, p] : m.params) grads.emplace_back(name, Tensor::zeros(p.shape));
  std::swap(grads[0].first, grads[1].first);
  CHECK_THROWS_AS(adam_step(m, a, grads, 1e-3), std::invalid_argument);
  std::swap(grads[0].first, grads[1].first);
  grads[2].second.data[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adam_step(m, a, grads, 1e-3),
                       doctest::Contains(grads[2].first.c_str()), std::runtime_error);
}

TEST_CASE("one epoch at zero learning rate changes nothing") {
  Dataset data = generate_dataset(tiny_darcy(10, 5));
  TrainConfig tc;
  tc.lr = 0.0;
  tc.epochs = 1;
  tc.ratio = 0.5;
  tc.seed = 9;
  TrainResult r = train(tiny_gano(), data, tc);
  CHECK(r.history.size() == 1);
  ModelState fresh = init_model(tiny_gano(), derive_seed(tc.seed, {stream::kInit}));
  for (std::size_t i = 0; i < fresh.params.size(); ++i)
    CHECK(r.best.params[i].second == fresh.params[i].second);
}

TEST_CASE("training on a toy set reduces the loss by an order of magnitude") {
  GenSettings g = tiny_darcy(5, 21);
  Dataset data = generate_dataset(g);
  // 5-sample toy set: train on all five, validate on the first.
  data.train_ids = {0, 1, 2, 3, 4};
  data.val_ids = {0};
  data.test_ids.clear();
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.ratio = 1.0;
  tc.epochs = 500;
  tc.seed = 3;
  TrainResult r = train(tiny_gano(), data, tc);
  CHECK(r.history.front().train_loss / r.history.back().train_loss >= 10.0);
  // Model selection: the returned state's validation loss is the minimum.
  for (const auto& h : r.history) CHECK(r.best_val <= h.val_loss);
}

TEST_CASE("same seed gives a bitwise-identical trajectory") {
  Dataset data = generate_dataset(tiny_darcy(10, 5));
  TrainConfig tc;
  tc.epochs = 25;
  tc.ratio = 0.4;
  tc.seed = 77;
  TrainResult a = train(tiny_gano(), data, tc);
  TrainResult b = train(tiny_gano(), data, tc);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
  }
  for (std::size_t i = 0; i < a.best.params.size(); ++i)
    CHECK(a.best.params[i].second == b.best.params[i].second);
}

TEST_CASE("subsample sizing follows ceil(ratio n)") {
  CHECK(detail::ratio_count(0.3, 10) == 3);
  CHECK(detail::ratio_count(0.25, 10) == 3);
  CHECK(detail::ratio_count(1.0, 7) == 7);
  CHECK(detail::ratio_count(0.05, 24) == 2);
  Tensor m(Shape{9, 2});
  for (std::size_t i = 0; i < 9; ++i) m.at(i, 0) = static_cast<double>(i);
  Tensor sub = detail::subsample_rows(m, 4, Rng(3));
  CHECK(sub.shape == Shape{4, 2});
  // Distinct rows.
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) CHECK(sub.at(i, 0) != sub.at(j, 0));
}

TEST_CASE("grid search: single cell equals train; ties break to the first-lowest axes") {
  Dataset data = generate_dataset(tiny_darcy(10, 5));
  TrainConfig tc;
  tc.epochs = 8;
  tc.seed = 13;
  tc.ratio = 0.4;
  GridResult g = grid_search(tiny_gano(), data, tc, {1e-3}, {0.4});
  TrainResult solo = train(tiny_gano(), data, tc);
  REQUIRE(g.cells.size() == 1);
  CHECK(g.cells[0].val_loss == solo.best_val);

  GridResult tie = grid_search(tiny_gano(), data, tc, {1e-3, 1e-3}, {0.4});
  REQUIRE(tie.cells.size() == 2);
  CHECK(tie.cells[0].val_loss == tie.cells[1].val_loss);
  CHECK(tie.best_index == 0);

  CHECK_THROWS_AS((void)grid_search(tiny_gano(), data, tc, {}, {0.3}), std::invalid_argument);
}

TEST_CASE("train validates its configuration and splits") {
  Dataset data = generate_dataset(tiny_darcy(10, 5));
  TrainConfig tc;
  tc.ratio = 0.0;
  CHECK_THROWS_AS((void)train(tiny_gano(), data, tc), std::invalid_argument);
  tc = TrainConfig{};
  Dataset empty = data;
  empty.val_ids.clear();
  CHECK_THROWS_AS((void)train(tiny_gano(), empty, tc), std::invalid_argument);
}
