#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pino/parallel.hpp"
#include "pino/physics.hpp"
#include "pino/rng.hpp"
#include "pino/sample.hpp"

namespace pino {

struct TrainConfig {
  double lr = 1e-3;
  double ratio = 0.3;  // interior sampling ratio, redrawn each epoch
  int batch_size = 20;
  int epochs = 2000;
  std::uint64_t seed = 0;
  LossWeights weights;
  MaterialParams material;

  void validate() const {
    if (!(ratio > 0.0) || ratio > 1.0)
      throw std::invalid_argument("train config: ratio must be in (0,1]");
    if (batch_size < 1 || epochs < 1)
      throw std::invalid_argument("train config: batch size and epochs must be positive");
    weights.validate();
    material.validate();
  }
};

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelState best;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<EpochStat> history;
  std::vector<std::pair<std::string, double>> initial_terms;  // unweighted, epoch 0 means
  std::vector<std::pair<std::string, double>> final_terms;
};

// ---------------------------------------------------------------------------
// Adam.

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam(const ModelState& model) {
  AdamState a;
  for (const auto& [name, p] : model.params) {
    a.m.push_back(Tensor::zeros(p.shape));
    a.v.push_back(Tensor::zeros(p.shape));
  }
  return a;
}

/// One Adam update with bias correction; gradients must be keyed identically
/// to the parameters.  A non-finite gradient aborts naming the parameter.
inline void adam_step(ModelState& model, AdamState& adam,
                      const std::vector<std::pair<std::string, Tensor>>& grads, double lr) {
  if (grads.size() != model.params.size())
    throw std::invalid_argument("adam_step: gradient/parameter count mismatch");
  adam.t += 1;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& [gname, g] = grads[i];
    auto& [pname, p] = model.params[i];
    if (gname != pname)
      throw std::invalid_argument("adam_step: gradient " + gname + " does not match parameter " +
                                  pname);
    if (!g.all_finite())
      throw std::runtime_error("adam_step: non-finite gradient for parameter " + pname);
    Tensor& m = adam.m[i];
    Tensor& v = adam.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.data[k];
      m.data[k] = adam.beta1 * m.data[k] + (1.0 - adam.beta1) * gk;
      v.data[k] = adam.beta2 * v.data[k] + (1.0 - adam.beta2) * gk * gk;
      const double mh = m.data[k] / bc1;
      const double vh = v.data[k] / bc2;
      p.data[k] -= lr * mh / (std::sqrt(vh) + adam.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop.

namespace detail {

/// k distinct rows chosen by partial Fisher-Yates; deterministic per stream.
inline Tensor subsample_rows(const Tensor& m, std::size_t k, Rng rng) {
  const std::size_t n = m.shape[0];
  k = std::min(k, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - i));
    std::swap(idx[i], idx[std::min(j, n - 1)]);
  }
  Tensor out(Shape{k, m.shape[1]});
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m.shape[1]; ++j) out.at(i, j) = m.at(idx[i], j);
  return out;
}

inline std::size_t ratio_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
}

inline bool is_cloud_model(ModelKind k) {
  return k == ModelKind::kPointNet || k == ModelKind::kPointNetStar;
}

struct SampleEval {
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  std::vector<std::pair<std::string, Tensor>> grads;
};

}  // namespace detail

/// Physics-informed training: per epoch, shuffle the training samples, form
/// batches, redraw the interior subsample at the configured ratio, average
/// per-sample parameter gradients and take one Adam step per batch.  The
/// model with the lowest validation loss is returned.  Point-cloud models
/// always see their full interior cloud (their architecture has no separate
/// trunk to subsample).
inline TrainResult train(const ModelConfig& mc, const Dataset& data, const TrainConfig& tc) {
  tc.validate();
  if (data.train_ids.empty() || data.val_ids.empty())
    throw std::invalid_argument("train: training and validation splits must be non-empty");

  TrainResult result;
  ModelState model = init_model(mc, derive_seed(tc.seed, {stream::kInit}));
  AdamState adam = make_adam(model);
  const bool cloud = detail::is_cloud_model(mc.kind);

  // Fixed validation subsample: deterministic, same size rule as training.
  std::vector<Tensor> val_interiors;
  for (std::size_t vi = 0; vi < data.val_ids.size(); ++vi) {
    const SampleRecord& s = data.samples[data.val_ids[vi]];
    val_interiors.push_back(
        cloud ? s.interior
              : detail::subsample_rows(
                    s.interior, detail::ratio_count(tc.ratio, s.interior.shape[0]),
                    Rng(derive_seed(tc.seed, {stream::kSubsample, 0, vi}))));
  }

  const auto t0 = std::chrono::steady_clock::now();
  Rng shuffle_root(derive_seed(tc.seed, {stream::kShuffle}));

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::vector<std::size_t> order = data.train_ids;
    {
      Rng r = shuffle_root.child({static_cast<std::uint64_t>(epoch)});
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(r.uniform() * static_cast<double>(i));
        std::swap(order[i - 1], order[std::min(j, i - 1)]);
      }
    }

    double epoch_loss = 0.0;
    std::vector<std::pair<std::string, double>> epoch_terms;
    try {
      for (std::size_t batch_start = 0; batch_start < order.size();
           batch_start += static_cast<std::size_t>(tc.batch_size)) {
        const std::size_t batch_end =
            std::min(order.size(), batch_start + static_cast<std::size_t>(tc.batch_size));
        const std::size_t bs = batch_end - batch_start;
        std::vector<detail::SampleEval> evals(bs);

        parallel_for(bs, [&](std::size_t k) {
          const std::size_t sid = order[batch_start + k];
          const SampleRecord& s = data.samples[sid];
          Tensor interior =
              cloud ? s.interior
                    : detail::subsample_rows(
                          s.interior, detail::ratio_count(tc.ratio, s.interior.shape[0]),
                          Rng(derive_seed(tc.seed, {stream::kSubsample,
                                                    static_cast<std::uint64_t>(epoch), sid})));
          Tape tape;
          BoundModel bound = bind_model(tape, model);
          LossGraph lg = sample_loss(tape, bound, s, interior, tc.weights, tc.material);
          evals[k].loss = tape.value(lg.total).data[0];
          evals[k].terms = lg.terms;
          evals[k].grads = parameter_gradients(tape, lg.total, bound);
        });

        // Mean gradient over the batch, accumulated in sample order.
        std::vector<std::pair<std::string, Tensor>> grads = evals[0].grads;
        for (std::size_t k = 1; k < bs; ++k)
          for (std::size_t p = 0; p < grads.size(); ++p)
            for (std::size_t e = 0; e < grads[p].second.size(); ++e)
              grads[p].second.data[e] += evals[k].grads[p].second.data[e];
        const double inv = 1.0 / static_cast<double>(bs);
        for (auto& [name, g] : grads)
          for (auto& v : g.data) v *= inv;
        adam_step(model, adam, grads, tc.lr);

        for (const auto& e : evals) {
          epoch_loss += e.loss;
          if (epoch_terms.empty())
            epoch_terms = e.terms;
          else
            for (std::size_t t = 0; t < epoch_terms.size(); ++t)
              epoch_terms[t].second += e.terms[t].second;
        }
      }
    } catch (const std::runtime_error& err) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " +
                               err.what());
    }
    epoch_loss /= static_cast<double>(order.size());
    for (auto& [name, v] : epoch_terms) v /= static_cast<double>(order.size());
    if (epoch == 1) result.initial_terms = epoch_terms;
    result.final_terms = epoch_terms;

    // Validation loss over the fixed subsets, no parameter gradients.
    std::vector<double> val_losses(data.val_ids.size());
    parallel_for(data.val_ids.size(), [&](std::size_t k) {
      const SampleRecord& s = data.samples[data.val_ids[k]];
      Tape tape;
      BoundModel bound = bind_model(tape, model);
      LossGraph lg = sample_loss(tape, bound, s, val_interiors[k], tc.weights, tc.material);
      val_losses[k] = tape.value(lg.total).data[0];
    });
    double val_loss = 0.0;
    for (double v : val_losses) val_loss += v;
    val_loss /= static_cast<double>(val_losses.size());

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back({epoch, epoch_loss, val_loss, wall});
    if (val_loss < result.best_val) {
      result.best_val = val_loss;
      result.best_epoch = epoch;
      result.best = model;
    }
  }
  if (result.best_epoch < 0) result.best = model;
  return result;
}

// ---------------------------------------------------------------------------
// Grid search over (learning rate, sampling ratio).

struct GridCell {
  double lr = 0.0;
  double ratio = 0.0;
  double val_loss = 0.0;
  int best_epoch = -1;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best_index = 0;
  TrainResult best;
};

/// Trains every (lr, ratio) cell with the same seed and returns the full
/// table plus the winning run.  Ties go to the lowest lr, then lowest ratio.
inline GridResult grid_search(const ModelConfig& mc, const Dataset& data, const TrainConfig& base,
                              const std::vector<double>& lrs, const std::vector<double>& ratios) {
  if (lrs.empty() || ratios.empty())
    throw std::invalid_argument("grid_search: axes must be non-empty");
  GridResult out;
  bool have_best = false;
  for (double lr : lrs)
    for (double ratio : ratios) {
      TrainConfig tc = base;
      tc.lr = lr;
      tc.ratio = ratio;
      TrainResult r = train(mc, data, tc);
      out.cells.push_back({lr, ratio, r.best_val, r.best_epoch});
      const GridCell& cand = out.cells.back();
      const GridCell& incumbent = out.cells[out.best_index];
      const bool better =
          !have_best || cand.val_loss < incumbent.val_loss ||
          (cand.val_loss == incumbent.val_loss &&
           (cand.lr < incumbent.lr || (cand.lr == incumbent.lr && cand.ratio < incumbent.ratio)));
      if (better) {
        out.best_index = out.cells.size() - 1;
        out.best = std::move(r);
        have_best = true;
      }
    }
  return out;
}

}  // namespace pino
