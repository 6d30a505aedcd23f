#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pino/rng.hpp"
#include "pino/tape.hpp"
#include "pino/tensor.hpp"

namespace pino {

enum class ModelKind { kGano, kDcon, kPointNet, kPointNetStar, kDeepOnet };
enum class Pooling { kAvg, kMax, kMin };
enum class Fusion { kConcat, kAdd, kMul };
enum class GeoInput { kVarBoundary, kAllBoundary, kInterior, kParametric };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kGano: return "gano";
    case ModelKind::kDcon: return "dcon";
    case ModelKind::kPointNet: return "pointnet";
    case ModelKind::kPointNetStar: return "pointnet-star";
    case ModelKind::kDeepOnet: return "deeponet";
  }
  return "?";
}
inline const char* to_string(Pooling p) {
  switch (p) {
    case Pooling::kAvg: return "avg";
    case Pooling::kMax: return "max";
    case Pooling::kMin: return "min";
  }
  return "?";
}
inline const char* to_string(Fusion f) {
  switch (f) {
    case Fusion::kConcat: return "concat";
    case Fusion::kAdd: return "add";
    case Fusion::kMul: return "mul";
  }
  return "?";
}
inline const char* to_string(GeoInput g) {
  switch (g) {
    case GeoInput::kVarBoundary: return "var-boundary";
    case GeoInput::kAllBoundary: return "all-boundary";
    case GeoInput::kInterior: return "interior";
    case GeoInput::kParametric: return "parametric";
  }
  return "?";
}

template <typename E>
E parse_enum(const std::string& s);

template <>
inline ModelKind parse_enum<ModelKind>(const std::string& s) {
  if (s == "gano") return ModelKind::kGano;
  if (s == "dcon") return ModelKind::kDcon;
  if (s == "pointnet") return ModelKind::kPointNet;
  if (s == "pointnet-star") return ModelKind::kPointNetStar;
  if (s == "deeponet") return ModelKind::kDeepOnet;
  throw std::invalid_argument("unknown model kind: " + s);
}
template <>
inline Pooling parse_enum<Pooling>(const std::string& s) {
  if (s == "avg") return Pooling::kAvg;
  if (s == "max") return Pooling::kMax;
  if (s == "min") return Pooling::kMin;
  throw std::invalid_argument("unknown pooling: " + s);
}
template <>
inline Fusion parse_enum<Fusion>(const std::string& s) {
  if (s == "concat") return Fusion::kConcat;
  if (s == "add") return Fusion::kAdd;
  if (s == "mul") return Fusion::kMul;
  throw std::invalid_argument("unknown fusion: " + s);
}
template <>
inline GeoInput parse_enum<GeoInput>(const std::string& s) {
  if (s == "var-boundary") return GeoInput::kVarBoundary;
  if (s == "all-boundary") return GeoInput::kAllBoundary;
  if (s == "interior") return GeoInput::kInterior;
  if (s == "parametric") return GeoInput::kParametric;
  throw std::invalid_argument("unknown geometry input: " + s);
}

/// Architecture descriptor; fully determines every parameter shape.
struct ModelConfig {
  ModelKind kind = ModelKind::kGano;
  int coord_dim = 2;
  int out_dim = 1;            // 1 pressure field / 2 displacement fields
  int width = 64;             // operator-layer width q
  int geo_width = 64;         // geometry embedding width q_g
  int operator_layers = 3;
  int branch_layers = 3;      // linear layers in the branch encoder
  int geo_layers = 3;         // linear layers in the geometry encoder
  int pointnet_layers = 3;    // hidden layers per PointNet MLP
  int branch_dim = 3;         // per-row branch width (coords + values)
  int geo_dim = 2;            // per-row geometry width (2, or parametric length)
  int branch_size = 0;        // flattened branch length (deeponet only)
  double coord_scale = 1.0;   // coordinate normalization inside the model
  Pooling pooling = Pooling::kAvg;
  Fusion fusion = Fusion::kConcat;
  GeoInput geo_input = GeoInput::kVarBoundary;

  void validate() const {
    if (width < 1 || geo_width < 1 || operator_layers < 1)
      throw std::invalid_argument("model config: widths and layer counts must be positive");
    if (kind == ModelKind::kGano && fusion != Fusion::kConcat && geo_width != width)
      throw std::invalid_argument(
          "model config: add/mul fusion requires equal trunk and geometry widths, got q=" +
          std::to_string(width) + " q_g=" + std::to_string(geo_width));
    if (kind == ModelKind::kDeepOnet && branch_size < 1)
      throw std::invalid_argument("model config: deeponet requires a fixed branch size");
  }
};

struct ModelState {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor>> params;

  Tensor& find(const std::string& name) {
    for (auto& [k, v] : params)
      if (k == name) return v;
    throw std::invalid_argument("model: unknown parameter " + name);
  }
  const Tensor& find(const std::string& name) const {
    return const_cast<ModelState*>(this)->find(name);
  }
};

/// Per-tape binding of a model's parameters as differentiable leaves.
struct BoundModel {
  const ModelConfig* config = nullptr;
  std::vector<std::pair<std::string, Var>> params;

  Var get(const std::string& name) const {
    for (const auto& [k, v] : params)
      if (k == name) return v;
    throw std::invalid_argument("model: unknown parameter " + name);
  }
};

inline BoundModel bind_model(Tape& tape, const ModelState& state) {
  BoundModel b;
  b.config = &state.config;
  b.params.reserve(state.params.size());
  for (const auto& [name, tensor] : state.params) b.params.emplace_back(name, tape.input(tensor));
  return b;
}

/// Named parameter gradients of a scalar loss; parameters off the loss path
/// get zero tensors.
inline std::vector<std::pair<std::string, Tensor>> parameter_gradients(Tape& tape, Var loss,
                                                                       const BoundModel& model) {
  std::vector<Var> vars;
  vars.reserve(model.params.size());
  for (const auto& [name, v] : model.params) vars.push_back(v);
  std::vector<Var> grads = tape.gradient_multi(loss, vars);
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i)
    out.emplace_back(model.params[i].first, tape.value(grads[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Initialization: Xavier-uniform weights, zero biases, deterministic per
// (seed, parameter index).

namespace detail {
inline Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(Shape{fan_in, fan_out});
  for (auto& v : w.data) v = rng.uniform(-limit, limit);
  return w;
}

inline void add_mlp(ModelState& s, const std::string& prefix, std::size_t in, std::size_t hidden,
                    std::size_t out, int layers, std::uint64_t seed) {
  for (int k = 0; k < layers; ++k) {
    const std::size_t fi = k == 0 ? in : hidden;
    const std::size_t fo = k == layers - 1 ? out : hidden;
    const std::string base = prefix + "." + std::to_string(k);
    s.params.emplace_back(
        base + ".W",
        xavier(fi, fo, Rng(derive_seed(seed, {stream::kInit, s.params.size()}))));
    s.params.emplace_back(base + ".B", Tensor::zeros(Shape{fo}));
  }
}
}  // namespace detail

inline ModelState init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelState s;
  s.config = config;
  const std::size_t q = static_cast<std::size_t>(config.width);
  const std::size_t qg = static_cast<std::size_t>(config.geo_width);
  const std::size_t d = static_cast<std::size_t>(config.coord_dim);

  switch (config.kind) {
    case ModelKind::kGano:
    case ModelKind::kDcon: {
      detail::add_mlp(s, "branch", static_cast<std::size_t>(config.branch_dim), q, q,
                      config.branch_layers, seed);
      if (config.kind == ModelKind::kGano)
        detail::add_mlp(s, "geo", static_cast<std::size_t>(config.geo_dim), qg, qg,
                        config.geo_layers, seed);
      s.params.emplace_back(
          "trunk.W", detail::xavier(d, q, Rng(derive_seed(seed, {stream::kInit, s.params.size()}))));
      s.params.emplace_back("trunk.B", Tensor::zeros(Shape{q}));
      const std::size_t first_in =
          config.kind == ModelKind::kGano && config.fusion == Fusion::kConcat ? q + qg : q;
      for (int j = 1; j <= config.operator_layers; ++j) {
        const std::size_t in = j == 1 ? first_in : q;
        if (j == config.operator_layers) {
          for (int c = 0; c < config.out_dim; ++c) {
            const std::string base = "op." + std::to_string(j) + ".c" + std::to_string(c);
            s.params.emplace_back(
                base + ".W",
                detail::xavier(in, q, Rng(derive_seed(seed, {stream::kInit, s.params.size()}))));
            s.params.emplace_back(base + ".B", Tensor::zeros(Shape{q}));
          }
        } else {
          const std::string base = "op." + std::to_string(j);
          s.params.emplace_back(
              base + ".W",
              detail::xavier(in, q, Rng(derive_seed(seed, {stream::kInit, s.params.size()}))));
          s.params.emplace_back(base + ".B", Tensor::zeros(Shape{q}));
        }
      }
      break;
    }
    case ModelKind::kPointNet:
    case ModelKind::kPointNetStar: {
      const std::size_t in = d + (config.kind == ModelKind::kPointNetStar
                                      ? static_cast<std::size_t>(config.branch_dim - config.coord_dim)
                                      : 0);
      detail::add_mlp(s, "u1", in, q, q, config.pointnet_layers, seed);
      detail::add_mlp(s, "u2", 2 * q, q, static_cast<std::size_t>(config.out_dim),
                      config.pointnet_layers, seed);
      break;
    }
    case ModelKind::kDeepOnet: {
      detail::add_mlp(s, "branch", static_cast<std::size_t>(config.branch_size), q, q,
                      config.branch_layers, seed);
      detail::add_mlp(s, "trunk", d, q, q * static_cast<std::size_t>(config.out_dim),
                      config.operator_layers, seed);
      break;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Forward passes.

namespace detail {
inline Var linear(Tape& tape, Var x, Var w, Var b) {
  (void)tape;
  return pino::linear(x, w, b);
}

/// Per-row MLP with tanh after every layer.
inline Var row_mlp(Tape& tape, const BoundModel& m, const std::string& prefix, Var rows,
                   int layers, bool tanh_last = true) {
  Var h = rows;
  for (int k = 0; k < layers; ++k) {
    const std::string base = prefix + "." + std::to_string(k);
    h = linear(tape, h, m.get(base + ".W"), m.get(base + ".B"));
    if (k + 1 < layers || tanh_last) h = tanh(h);
  }
  return h;
}

/// Scale the first ncoord columns (coordinate channels) of a row tensor.
inline Tensor scale_coord_columns(Tensor rows, std::size_t ncoord, double s) {
  for (std::size_t i = 0; i < rows.shape[0]; ++i)
    for (std::size_t j = 0; j < std::min(ncoord, rows.cols()); ++j) rows.at(i, j) *= s;
  return rows;
}

inline Var pool_rows(Var h, Pooling p) {
  switch (p) {
    case Pooling::kAvg: return mean_pool(h, 0);
    case Pooling::kMax: return max_pool(h, 0);
    case Pooling::kMin: return min_pool(h, 0);
  }
  throw std::logic_error("pool_rows");
}
}  // namespace detail

/// Branch encoder: per-row MLP over (coordinates, BC values) rows followed by
/// a max-pool across rows; output length is independent of the row count.
inline Var encode_parameters(Tape& tape, const BoundModel& m, const Tensor& branch_rows) {
  if (branch_rows.rank() != 2 || branch_rows.shape[0] == 0)
    throw std::invalid_argument("encode_parameters: branch input is empty");
  if (branch_rows.shape[1] != static_cast<std::size_t>(m.config->branch_dim))
    throw std::invalid_argument("encode_parameters: expected row width " +
                                std::to_string(m.config->branch_dim) + ", got " +
                                shape_str(branch_rows.shape));
  Tensor rows = detail::scale_coord_columns(branch_rows,
                                            static_cast<std::size_t>(m.config->coord_dim),
                                            m.config->coord_scale);
  Var h = detail::row_mlp(tape, m, "branch", tape.constant(std::move(rows)),
                          m.config->branch_layers, /*tanh_last=*/false);
  return max_pool(h, 0);
}

/// Geometry encoder: per-point MLP followed by the configured pooling.
inline Var encode_geometry(Tape& tape, const BoundModel& m, const Tensor& geo_rows) {
  if (geo_rows.rank() != 2 || geo_rows.shape[0] == 0)
    throw std::invalid_argument("encode_geometry: geometry input is empty");
  if (geo_rows.shape[1] != static_cast<std::size_t>(m.config->geo_dim))
    throw std::invalid_argument("encode_geometry: expected row width " +
                                std::to_string(m.config->geo_dim) + ", got " +
                                shape_str(geo_rows.shape));
  Tensor rows = detail::scale_coord_columns(geo_rows, geo_rows.cols(), m.config->coord_scale);
  Var h = detail::row_mlp(tape, m, "geo", tape.constant(std::move(rows)), m.config->geo_layers,
                          /*tanh_last=*/false);
  return detail::pool_rows(h, m.config->pooling);
}

namespace detail {
/// Stacked operator layers shared by DCON and the geometry-aware variant:
/// z_j = W_j t_{j-1} + B_j, modulated elementwise by the parameter embedding
/// b; tanh between layers, none after the last.
inline std::vector<Var> operator_stack(Tape& tape, const BoundModel& m, Var t0, Var b) {
  Var t = t0;
  const int L = m.config->operator_layers;
  for (int j = 1; j < L; ++j) {
    const std::string base = "op." + std::to_string(j);
    Var z = linear(tape, t, m.get(base + ".W"), m.get(base + ".B"));
    t = tanh(mul_rows(z, b));
  }
  std::vector<Var> out;
  for (int c = 0; c < m.config->out_dim; ++c) {
    const std::string base = "op." + std::to_string(L) + ".c" + std::to_string(c);
    Var z = linear(tape, t, m.get(base + ".W"), m.get(base + ".B"));
    out.push_back(row_sum(mul_rows(z, b)));
  }
  return out;
}

inline Var trunk_embedding(Tape& tape, const BoundModel& m, Var x) {
  Var xs = affine(x, 0.0, m.config->coord_scale);
  return tanh(linear(tape, xs, m.get("trunk.W"), m.get("trunk.B")));
}
}  // namespace detail

/// DCON prediction at a batch of coordinates given the parameter embedding b.
/// The geometry never enters: two domains with equal (x, b) produce equal
/// outputs.
inline std::vector<Var> dcon_forward(Tape& tape, const BoundModel& m, Var x, Var b) {
  if (tape.value(b).shape != Shape{static_cast<std::size_t>(m.config->width)})
    throw std::invalid_argument("dcon_forward: embedding width mismatch " +
                                shape_str(tape.value(b).shape));
  return detail::operator_stack(tape, m, detail::trunk_embedding(tape, m, x), b);
}

/// Geometry-aware prediction: the local coordinate embedding is fused with
/// the global geometry feature before the operator stack.
inline std::vector<Var> gano_forward(Tape& tape, const BoundModel& m, Var x, Var b, Var G) {
  const std::size_t q = static_cast<std::size_t>(m.config->width);
  const std::size_t qg = static_cast<std::size_t>(m.config->geo_width);
  if (tape.value(G).shape != Shape{qg})
    throw std::invalid_argument("gano_forward: geometry embedding shape " +
                                shape_str(tape.value(G).shape) + " does not match q_g " +
                                std::to_string(qg));
  if (m.config->fusion != Fusion::kConcat && q != qg)
    throw std::invalid_argument("gano_forward: add/mul fusion requires q == q_g");
  Var h = detail::trunk_embedding(tape, m, x);
  Var H = m.config->fusion == Fusion::kConcat
              ? concat(h, repeat_rows(G, tape.value(x).shape[0]), 1)
          : m.config->fusion == Fusion::kAdd ? add_rows(h, G)
                                             : mul_rows(h, G);
  return detail::operator_stack(tape, m, H, b);
}

/// PointNet over a whole point cloud (one domain at a time): per-point MLP,
/// max-pooled global feature, concatenation, per-point decoder.  The star
/// variant appends BC-value channels to the cloud rows (zeros where no value
/// is prescribed).
inline std::vector<Var> pointnet_forward(Tape& tape, const BoundModel& m, Var cloud,
                                         const Tensor* bc_channels = nullptr) {
  const Tensor& xc = tape.value(cloud);
  if (xc.rank() != 2 || xc.shape[0] == 0)
    throw std::invalid_argument("pointnet_forward: empty point cloud");
  Var rows = affine(cloud, 0.0, m.config->coord_scale);
  if (m.config->kind == ModelKind::kPointNetStar) {
    if (bc_channels == nullptr || bc_channels->shape[0] != xc.shape[0])
      throw std::invalid_argument("pointnet_forward: star variant needs BC channels per row");
    rows = concat(rows, tape.constant(*bc_channels), 1);
  }
  Var h = detail::row_mlp(tape, m, "u1", rows, m.config->pointnet_layers);
  Var G = max_pool(h, 0);
  Var H = concat(h, repeat_rows(G, xc.shape[0]), 1);
  Var u = detail::row_mlp(tape, m, "u2", H, m.config->pointnet_layers, /*tanh_last=*/false);
  std::vector<Var> out;
  for (int c = 0; c < m.config->out_dim; ++c) out.push_back(column(u, static_cast<std::size_t>(c)));
  return out;
}

/// Plain DeepONet: dot product of a fixed-size branch embedding with the
/// trunk embedding.  Discretization-dependent by construction: the branch
/// length is frozen at training time.
inline std::vector<Var> deeponet_forward(Tape& tape, const BoundModel& m, Var x,
                                         const Tensor& branch_flat) {
  if (branch_flat.rank() != 1 ||
      branch_flat.shape[0] != static_cast<std::size_t>(m.config->branch_size))
    throw std::invalid_argument(
        "deeponet_forward: branch input length " + shape_str(branch_flat.shape) +
        " differs from the training-time size " + std::to_string(m.config->branch_size));
  Tensor row(Shape{1, branch_flat.shape[0]}, branch_flat.data);
  Var bh = detail::row_mlp(tape, m, "branch", tape.constant(std::move(row)),
                           m.config->branch_layers, /*tanh_last=*/false);
  Var b = reshape(bh, Shape{static_cast<std::size_t>(m.config->width)});

  Var xs = affine(x, 0.0, m.config->coord_scale);
  Var t = detail::row_mlp(tape, m, "trunk", xs, m.config->operator_layers, /*tanh_last=*/false);
  const std::size_t q = static_cast<std::size_t>(m.config->width);
  std::vector<Var> out;
  for (int c = 0; c < m.config->out_dim; ++c) {
    Var block = slice(t, 1, static_cast<std::size_t>(c) * q, q);
    out.push_back(row_sum(mul_rows(block, b)));
  }
  return out;
}

}  // namespace pino
