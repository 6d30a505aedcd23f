#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pino/csv.hpp"
#include "pino/parallel.hpp"
#include "pino/physics.hpp"
#include "pino/sample.hpp"
#include "pino/training.hpp"
#include "pino/wos.hpp"

namespace pino {

struct SampleMetric {
  std::string id;
  std::string split;
  double metric = 0.0;  // Darcy: relative L2 vs the oracle; plate: physics violation
  std::vector<std::pair<std::string, double>> extras;
};

struct EvalSummary {
  std::vector<SampleMetric> rows;
  double mean = 0.0;
  double stddev = 0.0;
  std::string best_id;
  std::string worst_id;
};

/// Per-sample metrics over one split.  Darcy compares predictions against
/// the stored sphere-walk oracle (error if absent); the plate has no full
/// mixed-BC oracle, so it reports residual and BC-violation metrics.
inline EvalSummary evaluate(const ModelState& state, const Dataset& data,
                            const std::vector<std::size_t>& ids, const std::string& split_name,
                            const LossWeights& weights = LossWeights{},
                            const MaterialParams& material = MaterialParams{}) {
  if (ids.empty()) throw std::invalid_argument("evaluate: empty split");
  EvalSummary out;
  out.rows.resize(ids.size());

  parallel_for(ids.size(), [&](std::size_t k) {
    const SampleRecord& s = data.samples[ids[k]];
    SampleMetric m;
    m.id = s.id;
    m.split = split_name;
    if (s.problem == ProblemKind::kDarcy) {
      if (s.oracle_values.size() == 0 || s.eval_points.size() == 0)
        throw std::invalid_argument("evaluate: sample " + s.id +
                                    " has no oracle values; regenerate with oracle walks > 0");
      Tensor pred = predict(state, s, s.eval_points)[0];
      m.metric = relative_l2(pred, s.oracle_values);
    } else {
      Tape tape;
      BoundModel bound = bind_model(tape, state);
      LossGraph lg = plate_loss(tape, bound, s, s.eval_points.size() > 0 ? s.eval_points : s.interior,
                                weights, material);
      m.metric = tape.value(lg.total).data[0];
      for (const auto& [name, v] : lg.terms) {
        if (name == "pde")
          m.extras.emplace_back("residual_rms", std::sqrt(v));
        else
          m.extras.emplace_back(name + "_mse", v);
      }
    }
    out.rows[k] = std::move(m);
  });

  double sum = 0.0, sumsq = 0.0;
  double best = std::numeric_limits<double>::infinity(), worst = -best;
  for (const auto& r : out.rows) {
    sum += r.metric;
    sumsq += r.metric * r.metric;
    if (r.metric < best) {
      best = r.metric;
      out.best_id = r.id;
    }
    if (r.metric > worst) {
      worst = r.metric;
      out.worst_id = r.id;
    }
  }
  const double n = static_cast<double>(out.rows.size());
  out.mean = sum / n;
  out.stddev = std::sqrt(std::max(0.0, sumsq / n - out.mean * out.mean));
  return out;
}

/// Evaluation table: one row per sample followed by summary rows.
inline CsvTable eval_csv(const EvalSummary& e) {
  CsvTable t;
  t.header = {"kind", "sample", "split", "metric"};
  for (const auto& [name, v] : e.rows.front().extras) t.header.push_back(name);
  for (const auto& r : e.rows) {
    std::vector<std::string> row{"sample", r.id, r.split, csv_num(r.metric)};
    for (const auto& [name, v] : r.extras) row.push_back(csv_num(v));
    t.rows.push_back(std::move(row));
  }
  auto pad = [&](std::vector<std::string> row) {
    row.resize(t.header.size());
    return row;
  };
  t.rows.push_back(pad({"mean", "", e.rows.front().split, csv_num(e.mean)}));
  t.rows.push_back(pad({"std", "", e.rows.front().split, csv_num(e.stddev)}));
  t.rows.push_back(pad({"best", e.best_id, e.rows.front().split, ""}));
  t.rows.push_back(pad({"worst", e.worst_id, e.rows.front().split, ""}));
  return t;
}

// ---------------------------------------------------------------------------
// Geometry-embedding distance analysis.

struct EmbeddingDistances {
  std::vector<double> centroid;  // of set A
  std::vector<double> dist_a;
  std::vector<double> dist_b;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

/// Euclidean distance of each sample's geometry embedding to the centroid of
/// set A's embeddings, for both sets.
inline EmbeddingDistances embedding_distances(const ModelState& state,
                                              const std::vector<SampleRecord>& set_a,
                                              const std::vector<SampleRecord>& set_b) {
  if (set_a.empty() || set_b.empty())
    throw std::invalid_argument("embedding_distances: both sets must be non-empty");
  if (state.config.kind != ModelKind::kGano)
    throw std::invalid_argument("embedding_distances: model has no geometry encoder");

  auto embed = [&](const SampleRecord& s) {
    Tape tape;
    BoundModel m = bind_model(tape, state);
    return tape.value(encode_geometry(tape, m, geo_rows(s, state.config.geo_input)));
  };

  std::vector<Tensor> ea(set_a.size()), eb(set_b.size());
  parallel_for(set_a.size(), [&](std::size_t i) { ea[i] = embed(set_a[i]); });
  parallel_for(set_b.size(), [&](std::size_t i) { eb[i] = embed(set_b[i]); });

  EmbeddingDistances out;
  const std::size_t q = ea[0].size();
  out.centroid.assign(q, 0.0);
  for (const auto& e : ea)
    for (std::size_t j = 0; j < q; ++j) out.centroid[j] += e.data[j];
  for (auto& c : out.centroid) c /= static_cast<double>(ea.size());

  auto dist = [&](const Tensor& e) {
    double d = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      const double diff = e.data[j] - out.centroid[j];
      d += diff * diff;
    }
    return std::sqrt(d);
  };
  for (const auto& e : ea) out.dist_a.push_back(dist(e));
  for (const auto& e : eb) out.dist_b.push_back(dist(e));
  for (double d : out.dist_a) out.mean_a += d;
  for (double d : out.dist_b) out.mean_b += d;
  out.mean_a /= static_cast<double>(out.dist_a.size());
  out.mean_b /= static_cast<double>(out.dist_b.size());
  return out;
}

inline CsvTable embedding_csv(const EmbeddingDistances& e, const std::string& name_a,
                              const std::string& name_b) {
  CsvTable t;
  t.header = {"set", "index", "distance"};
  for (std::size_t i = 0; i < e.dist_a.size(); ++i)
    t.rows.push_back({name_a, std::to_string(i), csv_num(e.dist_a[i])});
  for (std::size_t i = 0; i < e.dist_b.size(); ++i)
    t.rows.push_back({name_b, std::to_string(i), csv_num(e.dist_b[i])});
  return t;
}

/// Loss-history table; wall_seconds is informational and excluded from
/// determinism comparisons.
inline CsvTable history_csv(const std::vector<EpochStat>& history) {
  CsvTable t;
  t.header = {"epoch", "train_loss", "val_loss", "wall_seconds"};
  for (const auto& h : history)
    t.rows.push_back({std::to_string(h.epoch), csv_num(h.train_loss), csv_num(h.val_loss),
                      csv_num(h.wall_seconds)});
  return t;
}

}  // namespace pino
