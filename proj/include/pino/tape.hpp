#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "pino/tensor.hpp"

namespace pino {

// Reverse-mode differentiation over a recorded operation tape.
//
// Every primitive evaluates eagerly when its node is appended, and every
// backward rule is expressed in terms of the same primitives, so the adjoint
// of a graph is itself a graph on the same tape.  Differentiating a
// derivative node therefore just runs another sweep; this is how second
// spatial derivatives and parameter gradients of residual losses are
// obtained.

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kMatMul,
  kTranspose,
  kReshape,
  kConcat,
  kSlice,
  kScatterSlice,
  kSumAll,
  kBroadcast,
  kRepeatRows,
  kRepeatCols,
  kSumAxis0,
  kRowSum,
  kMeanPool,
  kMaxPool,
  kMinPool,
  kTanh,
  kSquare,
  kAffine,
  kLinear,    // x [n,k] * W [k,q] + rows of B [q]
  kMulRows,   // z [n,q] * rows of v [q]
  kAddRows,   // z [n,q] + rows of v [q]
  kTanhGrad,  // g * (1 - y^2), the tanh chain factor
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kReshape: return "reshape";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kScatterSlice: return "scatter_slice";
    case Op::kSumAll: return "sum";
    case Op::kBroadcast: return "broadcast";
    case Op::kRepeatRows: return "repeat_rows";
    case Op::kRepeatCols: return "repeat_cols";
    case Op::kSumAxis0: return "sum_axis0";
    case Op::kRowSum: return "row_sum";
    case Op::kMeanPool: return "mean_pool";
    case Op::kMaxPool: return "max_pool";
    case Op::kMinPool: return "min_pool";
    case Op::kTanh: return "tanh";
    case Op::kSquare: return "square";
    case Op::kAffine: return "affine";
    case Op::kLinear: return "linear";
    case Op::kMulRows: return "mul_rows";
    case Op::kAddRows: return "add_rows";
    case Op::kTanhGrad: return "tanh_grad";
  }
  return "?";
}

class Tape;

/// Handle to one tape node.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

struct Node {
  Op op = Op::kLeaf;
  std::int32_t a = -1;
  std::int32_t b = -1;
  std::int32_t c = -1;
  std::int64_t p0 = 0;  // axis
  std::int64_t p1 = 0;  // start / extent / reshape dim 0
  std::int64_t p2 = 0;  // length / offset / reshape dim 1
  double c0 = 0.0;      // affine: additive
  double c1 = 0.0;      // affine: multiplicative
  bool differentiable = false;  // leaves only
  Tensor value;
};

class Tape {
 public:
  Var input(Tensor v) { return leaf(std::move(v), true); }
  Var constant(Tensor v) { return leaf(std::move(v), false); }

  const Tensor& value(Var v) const { return node(v.id).value; }
  std::size_t node_count() const { return nodes_.size(); }
  const Node& node(std::int32_t id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  Var emit(Op op, std::int32_t a, std::int32_t b, std::int64_t p0 = 0, std::int64_t p1 = 0,
           std::int64_t p2 = 0, double c0 = 0.0, double c1 = 0.0) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.p0 = p0;
    n.p1 = p1;
    n.p2 = p2;
    n.c0 = c0;
    n.c1 = c1;
    n.value = eval(n);
    if (!n.value.all_finite())
      throw std::runtime_error(std::string("tape: non-finite value produced by ") + op_name(op));
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  Var emit3(Op op, std::int32_t a, std::int32_t b, std::int32_t c) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    n.value = eval(n);
    if (!n.value.all_finite())
      throw std::runtime_error(std::string("tape: non-finite value produced by ") + op_name(op));
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  /// Recompute every non-leaf value from its operands and compare bitwise
  /// against the cached values.
  bool replay_matches() const {
    for (const auto& n : nodes_) {
      if (n.op == Op::kLeaf) continue;
      if (!(eval(n) == n.value)) return false;
    }
    return true;
  }

  /// Adjoint of scalar `y` with respect to `wrt`, built as new nodes on this
  /// tape; the result can be differentiated again.  Targets that do not
  /// connect to `y` receive a zero tensor.
  Var gradient(Var y, Var wrt);
  std::vector<Var> gradient_multi(Var y, const std::vector<Var>& wrt);

 private:
  std::deque<Node> nodes_;

  Var leaf(Tensor v, bool differentiable) {
    if (!v.all_finite()) throw std::runtime_error("tape: leaf tensor has non-finite entries");
    Node n;
    n.op = Op::kLeaf;
    n.differentiable = differentiable;
    n.value = std::move(v);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  void check_owned(Var v) const {
    if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw std::invalid_argument("tape: variable does not belong to this tape");
  }

  const Tensor& in_a(const Node& n) const { return nodes_[static_cast<std::size_t>(n.a)].value; }
  const Tensor& in_b(const Node& n) const { return nodes_[static_cast<std::size_t>(n.b)].value; }
  const Tensor& in_c(const Node& n) const { return nodes_[static_cast<std::size_t>(n.c)].value; }

  Tensor eval(const Node& n) const;
  Tensor pool_eval(const Node& n) const;
  void backward_step(std::int32_t id, Var g, const std::vector<char>& depends,
                     std::vector<std::int32_t>& adj);

  void accumulate(std::int32_t target, Var contribution, std::vector<std::int32_t>& adj) {
    std::int32_t& slot = adj[static_cast<std::size_t>(target)];
    if (slot < 0)
      slot = contribution.id;
    else
      slot = emit(Op::kAdd, slot, contribution.id).id;
  }
};

// ---------------------------------------------------------------------------
// Public op surface.  Shape checks throw std::invalid_argument naming both
// shapes.

namespace detail {
inline void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("tape: operands from different tapes");
}
inline void require_same_shape(const char* what, const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}
inline void require_axis(const char* what, const Tensor& t, int axis) {
  if (axis < 0 || t.rank() == 0 || static_cast<std::size_t>(axis) >= t.rank())
    throw std::invalid_argument(std::string(what) + ": axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(t.shape));
}
}  // namespace detail

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("add", a.tape->value(a), b.tape->value(b));
  return a.tape->emit(Op::kAdd, a.id, b.id);
}
inline Var sub(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("sub", a.tape->value(a), b.tape->value(b));
  return a.tape->emit(Op::kSub, a.id, b.id);
}
inline Var mul(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("mul", a.tape->value(a), b.tape->value(b));
  return a.tape->emit(Op::kMul, a.id, b.id);
}
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  const Tensor& ta = a.tape->value(a);
  const Tensor& tb = b.tape->value(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(ta.shape) + " x " +
                                shape_str(tb.shape));
  return a.tape->emit(Op::kMatMul, a.id, b.id);
}

namespace detail {
/// Matmul with implicit operand transposes (backward-pass form).
inline Var matmul_t(Var a, Var b, bool ta, bool tb) {
  return a.tape->emit(Op::kMatMul, a.id, b.id, ta ? 1 : 0, tb ? 1 : 0);
}
}  // namespace detail

inline Var transpose(Var a) {
  if (a.tape->value(a).rank() != 2)
    throw std::invalid_argument("transpose: rank-2 tensor required, got " +
                                shape_str(a.tape->value(a).shape));
  return a.tape->emit(Op::kTranspose, a.id, -1);
}

inline Var reshape(Var a, const Shape& s) {
  if (numel(s) != a.tape->value(a).size())
    throw std::invalid_argument("reshape: element count mismatch " +
                                shape_str(a.tape->value(a).shape) + " -> " + shape_str(s));
  if (s.size() > 2) throw std::invalid_argument("reshape: rank > 2 unsupported");
  std::int64_t r0 = s.empty() ? -1 : static_cast<std::int64_t>(s[0]);
  std::int64_t r1 = s.size() > 1 ? static_cast<std::int64_t>(s[1]) : -1;
  return a.tape->emit(Op::kReshape, a.id, -1, 0, r0, r1);
}

inline Var concat(Var a, Var b, int axis) {
  detail::require_same_tape(a, b);
  const Tensor& ta = a.tape->value(a);
  const Tensor& tb = b.tape->value(b);
  if (ta.rank() != tb.rank() || ta.rank() < 1 || ta.rank() > 2)
    throw std::invalid_argument("concat: incompatible shapes " + shape_str(ta.shape) + " and " +
                                shape_str(tb.shape));
  detail::require_axis("concat", ta, axis);
  for (std::size_t d = 0; d < ta.rank(); ++d)
    if (d != static_cast<std::size_t>(axis) && ta.shape[d] != tb.shape[d])
      throw std::invalid_argument("concat: shape mismatch off axis " + std::to_string(axis) +
                                  ": " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  return a.tape->emit(Op::kConcat, a.id, b.id, axis);
}

inline Var slice(Var a, int axis, std::size_t start, std::size_t len) {
  const Tensor& t = a.tape->value(a);
  detail::require_axis("slice", t, axis);
  if (start + len > t.shape[static_cast<std::size_t>(axis)])
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") exceeds shape " +
                                shape_str(t.shape));
  return a.tape->emit(Op::kSlice, a.id, -1, axis, static_cast<std::int64_t>(start),
                      static_cast<std::int64_t>(len));
}

/// Sum of all elements, rank-0 result.
inline Var sum(Var a) { return a.tape->emit(Op::kSumAll, a.id, -1); }

inline Var mean_pool(Var a, int axis) {
  detail::require_axis("mean_pool", a.tape->value(a), axis);
  return a.tape->emit(Op::kMeanPool, a.id, -1, axis);
}
inline Var max_pool(Var a, int axis) {
  detail::require_axis("max_pool", a.tape->value(a), axis);
  return a.tape->emit(Op::kMaxPool, a.id, -1, axis);
}
inline Var min_pool(Var a, int axis) {
  detail::require_axis("min_pool", a.tape->value(a), axis);
  return a.tape->emit(Op::kMinPool, a.id, -1, axis);
}

inline Var tanh(Var a) { return a.tape->emit(Op::kTanh, a.id, -1); }
inline Var square(Var a) { return a.tape->emit(Op::kSquare, a.id, -1); }

/// Elementwise c0 + c1 * x.
inline Var affine(Var a, double c0, double c1) {
  return a.tape->emit(Op::kAffine, a.id, -1, 0, 0, 0, c0, c1);
}
inline Var scale(Var a, double m) { return affine(a, 0.0, m); }
inline Var neg(Var a) { return affine(a, 0.0, -1.0); }

/// Mean of all elements, rank-0 result.
inline Var mean(Var a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.tape->value(a).size()));
}

/// x W + B broadcast over rows, as one node.
inline Var linear(Var x, Var w, Var bias) {
  detail::require_same_tape(x, w);
  detail::require_same_tape(x, bias);
  const Tensor& tx = x.tape->value(x);
  const Tensor& tw = x.tape->value(w);
  const Tensor& tb = x.tape->value(bias);
  if (tx.rank() != 2 || tw.rank() != 2 || tx.shape[1] != tw.shape[0] || tb.rank() != 1 ||
      tb.shape[0] != tw.shape[1])
    throw std::invalid_argument("linear: incompatible shapes " + shape_str(tx.shape) + " x " +
                                shape_str(tw.shape) + " + " + shape_str(tb.shape));
  return x.tape->emit3(Op::kLinear, x.id, w.id, bias.id);
}

/// Elementwise product of every row of z with the vector v.
inline Var mul_rows(Var z, Var v) {
  detail::require_same_tape(z, v);
  const Tensor& tz = z.tape->value(z);
  const Tensor& tv = z.tape->value(v);
  if (tz.rank() != 2 || tv.rank() != 1 || tz.shape[1] != tv.shape[0])
    throw std::invalid_argument("mul_rows: incompatible shapes " + shape_str(tz.shape) + " vs " +
                                shape_str(tv.shape));
  return z.tape->emit3(Op::kMulRows, z.id, v.id, -1);
}

/// Add the vector v to every row of z.
inline Var add_rows(Var z, Var v) {
  detail::require_same_tape(z, v);
  const Tensor& tz = z.tape->value(z);
  const Tensor& tv = z.tape->value(v);
  if (tz.rank() != 2 || tv.rank() != 1 || tz.shape[1] != tv.shape[0])
    throw std::invalid_argument("add_rows: incompatible shapes " + shape_str(tz.shape) + " vs " +
                                shape_str(tv.shape));
  return z.tape->emit3(Op::kAddRows, z.id, v.id, -1);
}

/// Replicate a rank-1 vector [q] into n identical rows [n,q].
inline Var repeat_rows(Var v, std::size_t n) {
  const Tensor& t = v.tape->value(v);
  if (t.rank() != 1)
    throw std::invalid_argument("repeat_rows: rank-1 tensor required, got " + shape_str(t.shape));
  return v.tape->emit(Op::kRepeatRows, v.id, -1, 0, static_cast<std::int64_t>(n));
}

/// Per-row sum of a rank-2 tensor: [n,q] -> [n].
inline Var row_sum(Var m) {
  const Tensor& t = m.tape->value(m);
  if (t.rank() != 2)
    throw std::invalid_argument("row_sum: rank-2 tensor required, got " + shape_str(t.shape));
  return m.tape->emit(Op::kRowSum, m.id, -1);
}

/// Column c of a rank-2 tensor as a rank-1 vector.
inline Var column(Var m, std::size_t c) {
  const Tensor& t = m.tape->value(m);
  return reshape(slice(m, 1, c, 1), Shape{t.shape[0]});
}

// ---------------------------------------------------------------------------
// Spatial derivatives.
//
// For per-point outputs u [n] of a network evaluated at coordinates x [n,d],
// the adjoint of sum(u) with respect to x carries, in row j, the derivative
// of u_j with respect to its own coordinates whenever rows are processed
// independently (true for every trunk-style model here).  For point-cloud
// models whose pooling couples rows, the same seed is used, matching the
// usual physics-informed practice of differentiating the summed prediction.

inline Var coordinate_gradient(Var u, Var x) { return u.tape->gradient(sum(u), x); }

/// d^order u / dx_i [dx_j]; order 1 returns du/dx_i, order 2 the second
/// derivative for pair (i,j) (pure when j is omitted).  The result is a
/// rank-1 vector aligned with the rows of x and remains differentiable with
/// respect to anything upstream of u.
inline Var spatial_derivs(Var u, Var x, int order, int i, int j = -1) {
  if (order < 1 || order > 2)
    throw std::invalid_argument("spatial_derivs: order " + std::to_string(order) +
                                " unsupported (1 or 2)");
  const Tensor& tx = x.tape->value(x);
  if (tx.rank() != 2)
    throw std::invalid_argument("spatial_derivs: coordinates must be rank-2, got " +
                                shape_str(tx.shape));
  if (i < 0 || static_cast<std::size_t>(i) >= tx.shape[1])
    throw std::invalid_argument("spatial_derivs: component out of range");
  Var d1 = column(coordinate_gradient(u, x), static_cast<std::size_t>(i));
  if (order == 1) return d1;
  if (j < 0) j = i;
  if (static_cast<std::size_t>(j) >= tx.shape[1])
    throw std::invalid_argument("spatial_derivs: component out of range");
  return column(coordinate_gradient(d1, x), static_cast<std::size_t>(j));
}

// ---------------------------------------------------------------------------
// Evaluation.

inline Tensor Tape::pool_eval(const Node& n) const {
  const Tensor& a = in_a(n);
  const int axis = static_cast<int>(n.p0);
  const std::size_t r = a.rows(), c = a.cols();
  // Reduce to "groups x lanes": pooling runs over the group index.
  const bool over_rows = (a.rank() == 1) || axis == 0;
  const std::size_t lanes = a.rank() == 1 ? 1 : (over_rows ? c : r);
  const std::size_t span = over_rows ? (a.rank() == 1 ? a.size() : r) : c;
  Shape out_shape;
  if (a.rank() == 2) out_shape = Shape{lanes};
  Tensor out(out_shape);

  auto at = [&](std::size_t g, std::size_t lane) {
    if (a.rank() == 1) return a.data[g];
    return over_rows ? a.at(g, lane) : a.at(lane, g);
  };

  if (n.op == Op::kMeanPool) {
    // Sorted, shifted summation: exactly permutation invariant and exact for
    // identical entries.
    std::vector<double> vals(span);
    for (std::size_t lane = 0; lane < lanes; ++lane) {
      for (std::size_t g = 0; g < span; ++g) vals[g] = at(g, lane);
      std::sort(vals.begin(), vals.end());
      const double base = vals[0];
      double acc = 0.0;
      for (double v : vals) acc += v - base;
      out.data[lane] = base + acc / static_cast<double>(span);
    }
    return out;
  }
  const bool want_max = n.op == Op::kMaxPool;
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    double best = at(0, lane);
    for (std::size_t g = 1; g < span; ++g) {
      double v = at(g, lane);
      if (want_max ? (v > best) : (v < best)) best = v;
    }
    out.data[lane] = best;
  }
  return out;
}

inline Tensor Tape::eval(const Node& n) const {
  switch (n.op) {
    case Op::kLeaf:
      return n.value;
    case Op::kAdd: {
      const Tensor& a = in_a(n);
      const Tensor& b = in_b(n);
      Tensor out(a.shape);
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i] + b.data[i];
      return out;
    }
    case Op::kSub: {
      const Tensor& a = in_a(n);
      const Tensor& b = in_b(n);
      Tensor out(a.shape);
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i] - b.data[i];
      return out;
    }
    case Op::kMul: {
      const Tensor& a = in_a(n);
      const Tensor& b = in_b(n);
      Tensor out(a.shape);
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i] * b.data[i];
      return out;
    }
    case Op::kMatMul: {
      // p0 / p1 transpose the first / second operand without materializing.
      const Tensor& a = in_a(n);
      const Tensor& b = in_b(n);
      const bool ta = n.p0 != 0, tb = n.p1 != 0;
      const std::size_t m = ta ? a.shape[1] : a.shape[0];
      const std::size_t k = ta ? a.shape[0] : a.shape[1];
      const std::size_t c = tb ? b.shape[0] : b.shape[1];
      Tensor out(Shape{m, c});
      if (!ta && !tb) {
        for (std::size_t i = 0; i < m; ++i) {
          double* oi = &out.data[i * c];
          const double* ai = &a.data[i * k];
          for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            const double* bt = &b.data[t * c];
            for (std::size_t j = 0; j < c; ++j) oi[j] += av * bt[j];
          }
        }
      } else if (!ta && tb) {
        // a [m,k] x b [c,k]: rows dot rows.
        for (std::size_t i = 0; i < m; ++i) {
          const double* ai = &a.data[i * k];
          double* oi = &out.data[i * c];
          for (std::size_t j = 0; j < c; ++j) {
            const double* bj = &b.data[j * k];
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
            oi[j] = acc;
          }
        }
      } else if (ta && !tb) {
        // a [k,m] x b [k,c]: sum of outer products of matching rows.
        for (std::size_t t = 0; t < k; ++t) {
          const double* at = &a.data[t * m];
          const double* bt = &b.data[t * c];
          for (std::size_t i = 0; i < m; ++i) {
            const double av = at[i];
            double* oi = &out.data[i * c];
            for (std::size_t j = 0; j < c; ++j) oi[j] += av * bt[j];
          }
        }
      } else {
        throw std::logic_error("matmul: double transpose is never emitted");
      }
      return out;
    }
    case Op::kTranspose: {
      const Tensor& a = in_a(n);
      Tensor out(Shape{a.shape[1], a.shape[0]});
      for (std::size_t i = 0; i < a.shape[0]; ++i)
        for (std::size_t j = 0; j < a.shape[1]; ++j) out.at(j, i) = a.at(i, j);
      return out;
    }
    case Op::kReshape: {
      Tensor out = in_a(n);
      Shape s;
      if (n.p1 >= 0) s.push_back(static_cast<std::size_t>(n.p1));
      if (n.p2 >= 0) s.push_back(static_cast<std::size_t>(n.p2));
      out.shape = s;
      return out;
    }
    case Op::kConcat: {
      const Tensor& a = in_a(n);
      const Tensor& b = in_b(n);
      const int axis = static_cast<int>(n.p0);
      if (a.rank() == 1 || axis == 0) {
        Shape s = a.shape;
        s[0] += b.shape[0];
        Tensor out(s);
        std::copy(a.data.begin(), a.data.end(), out.data.begin());
        std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.size());
        return out;
      }
      Tensor out(Shape{a.shape[0], a.shape[1] + b.shape[1]});
      for (std::size_t i = 0; i < a.shape[0]; ++i) {
        for (std::size_t j = 0; j < a.shape[1]; ++j) out.at(i, j) = a.at(i, j);
        for (std::size_t j = 0; j < b.shape[1]; ++j) out.at(i, a.shape[1] + j) = b.at(i, j);
      }
      return out;
    }
    case Op::kSlice: {
      const Tensor& a = in_a(n);
      const int axis = static_cast<int>(n.p0);
      const std::size_t start = static_cast<std::size_t>(n.p1);
      const std::size_t len = static_cast<std::size_t>(n.p2);
      if (a.rank() == 1) {
        Tensor out(Shape{len});
        std::copy(a.data.begin() + static_cast<std::ptrdiff_t>(start),
                  a.data.begin() + static_cast<std::ptrdiff_t>(start + len), out.data.begin());
        return out;
      }
      if (axis == 0) {
        Tensor out(Shape{len, a.shape[1]});
        std::copy(a.data.begin() + static_cast<std::ptrdiff_t>(start * a.shape[1]),
                  a.data.begin() + static_cast<std::ptrdiff_t>((start + len) * a.shape[1]),
                  out.data.begin());
        return out;
      }
      Tensor out(Shape{a.shape[0], len});
      for (std::size_t i = 0; i < a.shape[0]; ++i)
        for (std::size_t j = 0; j < len; ++j) out.at(i, j) = a.at(i, start + j);
      return out;
    }
    case Op::kScatterSlice: {
      // Inverse of slice: place input into zeros of extent p1 along axis p0
      // at offset p2.
      const Tensor& a = in_a(n);
      const int axis = static_cast<int>(n.p0);
      const std::size_t extent = static_cast<std::size_t>(n.p1);
      const std::size_t offset = static_cast<std::size_t>(n.p2);
      if (a.rank() == 1) {
        Tensor out(Shape{extent});
        std::copy(a.data.begin(), a.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        return out;
      }
      if (axis == 0) {
        Tensor out(Shape{extent, a.shape[1]});
        std::copy(a.data.begin(), a.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(offset * a.shape[1]));
        return out;
      }
      Tensor out(Shape{a.shape[0], extent});
      for (std::size_t i = 0; i < a.shape[0]; ++i)
        for (std::size_t j = 0; j < a.shape[1]; ++j) out.at(i, offset + j) = a.at(i, j);
      return out;
    }
    case Op::kSumAll: {
      const Tensor& a = in_a(n);
      double acc = 0.0;
      for (double v : a.data) acc += v;
      return Tensor::scalar(acc);
    }
    case Op::kBroadcast: {
      Shape s;
      if (n.p1 >= 0) s.push_back(static_cast<std::size_t>(n.p1));
      if (n.p2 >= 0) s.push_back(static_cast<std::size_t>(n.p2));
      return Tensor::full(s, in_a(n).data[0]);
    }
    case Op::kLinear: {
      const Tensor& x = in_a(n);
      const Tensor& w = in_b(n);
      const Tensor& bias = in_c(n);
      const std::size_t m = x.shape[0], k = x.shape[1], q = w.shape[1];
      Tensor out(Shape{m, q});
      for (std::size_t i = 0; i < m; ++i) {
        double* oi = &out.data[i * q];
        std::copy(bias.data.begin(), bias.data.end(), oi);
        const double* xi = &x.data[i * k];
        for (std::size_t t = 0; t < k; ++t) {
          const double xv = xi[t];
          const double* wt = &w.data[t * q];
          for (std::size_t j = 0; j < q; ++j) oi[j] += xv * wt[j];
        }
      }
      return out;
    }
    case Op::kMulRows: {
      const Tensor& z = in_a(n);
      const Tensor& v = in_b(n);
      const std::size_t m = z.shape[0], q = z.shape[1];
      Tensor out(Shape{m, q});
      for (std::size_t i = 0; i < m; ++i) {
        const double* zi = &z.data[i * q];
        double* oi = &out.data[i * q];
        for (std::size_t j = 0; j < q; ++j) oi[j] = zi[j] * v.data[j];
      }
      return out;
    }
    case Op::kAddRows: {
      const Tensor& z = in_a(n);
      const Tensor& v = in_b(n);
      const std::size_t m = z.shape[0], q = z.shape[1];
      Tensor out(Shape{m, q});
      for (std::size_t i = 0; i < m; ++i) {
        const double* zi = &z.data[i * q];
        double* oi = &out.data[i * q];
        for (std::size_t j = 0; j < q; ++j) oi[j] = zi[j] + v.data[j];
      }
      return out;
    }
    case Op::kTanhGrad: {
      const Tensor& y = in_a(n);
      const Tensor& gv = in_b(n);
      Tensor out(y.shape);
      for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = gv.data[i] * (1.0 - y.data[i] * y.data[i]);
      return out;
    }
    case Op::kMeanPool:
    case Op::kMaxPool:
    case Op::kMinPool:
      return pool_eval(n);
    case Op::kTanh: {
      const Tensor& a = in_a(n);
      Tensor out(a.shape);
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::tanh(a.data[i]);
      return out;
    }
    case Op::kSquare: {
      const Tensor& a = in_a(n);
      Tensor out(a.shape);
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.data[i] * a.data[i];
      return out;
    }
    case Op::kAffine: {
      const Tensor& a = in_a(n);
      Tensor out(a.shape);
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = n.c0 + n.c1 * a.data[i];
      return out;
    }
    case Op::kRepeatRows: {
      const Tensor& a = in_a(n);
      const std::size_t rows = static_cast<std::size_t>(n.p1), q = a.shape[0];
      Tensor out(Shape{rows, q});
      for (std::size_t i = 0; i < rows; ++i)
        std::copy(a.data.begin(), a.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * q));
      return out;
    }
    case Op::kRepeatCols: {
      const Tensor& a = in_a(n);
      const std::size_t cols = static_cast<std::size_t>(n.p1), rows = a.shape[0];
      Tensor out(Shape{rows, cols});
      for (std::size_t i = 0; i < rows; ++i) {
        const double v = a.data[i];
        double* oi = &out.data[i * cols];
        for (std::size_t j = 0; j < cols; ++j) oi[j] = v;
      }
      return out;
    }
    case Op::kSumAxis0: {
      const Tensor& a = in_a(n);
      const std::size_t rows = a.shape[0], q = a.shape[1];
      Tensor out(Shape{q});
      for (std::size_t i = 0; i < rows; ++i) {
        const double* ai = &a.data[i * q];
        for (std::size_t j = 0; j < q; ++j) out.data[j] += ai[j];
      }
      return out;
    }
    case Op::kRowSum: {
      const Tensor& a = in_a(n);
      const std::size_t rows = a.shape[0], q = a.shape[1];
      Tensor out(Shape{rows});
      for (std::size_t i = 0; i < rows; ++i) {
        const double* ai = &a.data[i * q];
        double acc = 0.0;
        for (std::size_t j = 0; j < q; ++j) acc += ai[j];
        out.data[i] = acc;
      }
      return out;
    }
  }
  throw std::logic_error("tape: unknown op");
}

// ---------------------------------------------------------------------------
// Backward rules.

inline void Tape::backward_step(std::int32_t id, Var g, const std::vector<char>& depends,
                                std::vector<std::int32_t>& adj) {
  const Node n = node(id);  // copy: nodes_ may reallocate while emitting
  auto dep = [&](std::int32_t t) { return t >= 0 && depends[static_cast<std::size_t>(t)]; };
  Var va{this, n.a};
  Var vb{this, n.b};

  switch (n.op) {
    case Op::kLeaf:
      return;
    case Op::kAdd:
      if (dep(n.a)) accumulate(n.a, g, adj);
      if (dep(n.b)) accumulate(n.b, g, adj);
      return;
    case Op::kSub:
      if (dep(n.a)) accumulate(n.a, g, adj);
      if (dep(n.b)) accumulate(n.b, neg(g), adj);
      return;
    case Op::kMul:
      if (dep(n.a)) accumulate(n.a, mul(g, vb), adj);
      if (dep(n.b)) accumulate(n.b, mul(g, va), adj);
      return;
    case Op::kMatMul: {
      const bool ta = n.p0 != 0, tb = n.p1 != 0;
      if (!ta && !tb) {
        if (dep(n.a)) accumulate(n.a, detail::matmul_t(g, vb, false, true), adj);
        if (dep(n.b)) accumulate(n.b, detail::matmul_t(va, g, true, false), adj);
      } else if (!ta && tb) {
        if (dep(n.a)) accumulate(n.a, detail::matmul_t(g, vb, false, false), adj);
        if (dep(n.b)) accumulate(n.b, detail::matmul_t(g, va, true, false), adj);
      } else {
        if (dep(n.a)) accumulate(n.a, detail::matmul_t(vb, g, false, true), adj);
        if (dep(n.b)) accumulate(n.b, detail::matmul_t(va, g, false, false), adj);
      }
      return;
    }
    case Op::kTranspose:
      if (dep(n.a)) accumulate(n.a, transpose(g), adj);
      return;
    case Op::kReshape:
      if (dep(n.a)) accumulate(n.a, reshape(g, value(va).shape), adj);
      return;
    case Op::kConcat: {
      const int axis = static_cast<int>(n.p0);
      const Tensor& ta = value(va);
      const Tensor& tb = value(vb);
      const std::size_t ax = static_cast<std::size_t>(axis);
      if (dep(n.a)) accumulate(n.a, slice(g, axis, 0, ta.shape[ax]), adj);
      if (dep(n.b)) accumulate(n.b, slice(g, axis, ta.shape[ax], tb.shape[ax]), adj);
      return;
    }
    case Op::kSlice: {
      if (!dep(n.a)) return;
      const Tensor& ta = value(va);
      const std::size_t extent = ta.shape[static_cast<std::size_t>(n.p0)];
      accumulate(n.a,
                 emit(Op::kScatterSlice, g.id, -1, n.p0, static_cast<std::int64_t>(extent), n.p1),
                 adj);
      return;
    }
    case Op::kScatterSlice:
      if (dep(n.a))
        accumulate(n.a,
                   slice(g, static_cast<int>(n.p0), static_cast<std::size_t>(n.p2),
                         value(va).shape[static_cast<std::size_t>(n.p0)]),
                   adj);
      return;
    case Op::kSumAll: {
      if (!dep(n.a)) return;
      const Shape& s = value(va).shape;
      std::int64_t d0 = s.empty() ? -1 : static_cast<std::int64_t>(s[0]);
      std::int64_t d1 = s.size() > 1 ? static_cast<std::int64_t>(s[1]) : -1;
      accumulate(n.a, emit(Op::kBroadcast, g.id, -1, 0, d0, d1), adj);
      return;
    }
    case Op::kBroadcast:
      if (dep(n.a)) accumulate(n.a, sum(g), adj);
      return;
    case Op::kRepeatRows:
      if (dep(n.a)) accumulate(n.a, emit(Op::kSumAxis0, g.id, -1), adj);
      return;
    case Op::kSumAxis0:
      if (dep(n.a))
        accumulate(n.a,
                   emit(Op::kRepeatRows, g.id, -1, 0,
                        static_cast<std::int64_t>(value(va).shape[0])),
                   adj);
      return;
    case Op::kRowSum:
      if (dep(n.a))
        accumulate(n.a,
                   emit(Op::kRepeatCols, g.id, -1, 0,
                        static_cast<std::int64_t>(value(va).shape[1])),
                   adj);
      return;
    case Op::kRepeatCols:
      if (dep(n.a)) accumulate(n.a, emit(Op::kRowSum, g.id, -1), adj);
      return;
    case Op::kMeanPool: {
      if (!dep(n.a)) return;
      const Tensor& ta = value(va);
      if (ta.rank() == 1) {
        const double inv = 1.0 / static_cast<double>(ta.size());
        accumulate(n.a,
                   scale(emit(Op::kBroadcast, g.id, -1, 0,
                              static_cast<std::int64_t>(ta.shape[0]), -1),
                         inv),
                   adj);
        return;
      }
      const int axis = static_cast<int>(n.p0);
      const std::size_t span = ta.shape[static_cast<std::size_t>(axis)];
      Var spread = axis == 0
                       ? repeat_rows(g, span)
                       : emit(Op::kRepeatCols, g.id, -1, 0, static_cast<std::int64_t>(span));
      accumulate(n.a, scale(spread, 1.0 / static_cast<double>(span)), adj);
      return;
    }
    case Op::kMaxPool:
    case Op::kMinPool: {
      if (!dep(n.a)) return;
      const Tensor& ta = value(va);
      const bool want_max = n.op == Op::kMaxPool;
      // One-hot mask of the arg-extreme entries, ties to the lowest index;
      // the whole incoming gradient routes there.
      Tensor mask = Tensor::zeros(ta.shape);
      if (ta.rank() == 1) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < ta.size(); ++i)
          if (want_max ? (ta.data[i] > ta.data[best]) : (ta.data[i] < ta.data[best])) best = i;
        mask.data[best] = 1.0;
        Var spread = emit(Op::kBroadcast, g.id, -1, 0, static_cast<std::int64_t>(ta.shape[0]), -1);
        accumulate(n.a, mul(spread, constant(std::move(mask))), adj);
        return;
      }
      const int axis = static_cast<int>(n.p0);
      if (axis == 0) {
        for (std::size_t j = 0; j < ta.shape[1]; ++j) {
          std::size_t best = 0;
          for (std::size_t i = 1; i < ta.shape[0]; ++i)
            if (want_max ? (ta.at(i, j) > ta.at(best, j)) : (ta.at(i, j) < ta.at(best, j)))
              best = i;
          mask.at(best, j) = 1.0;
        }
        accumulate(n.a, mul(repeat_rows(g, ta.shape[0]), constant(std::move(mask))), adj);
      } else {
        for (std::size_t i = 0; i < ta.shape[0]; ++i) {
          std::size_t best = 0;
          for (std::size_t j = 1; j < ta.shape[1]; ++j)
            if (want_max ? (ta.at(i, j) > ta.at(i, best)) : (ta.at(i, j) < ta.at(i, best)))
              best = j;
          mask.at(i, best) = 1.0;
        }
        Var spread =
            emit(Op::kRepeatCols, g.id, -1, 0, static_cast<std::int64_t>(ta.shape[1]));
        accumulate(n.a, mul(spread, constant(std::move(mask))), adj);
      }
      return;
    }
    case Op::kTanh: {
      if (!dep(n.a)) return;
      accumulate(n.a, emit(Op::kTanhGrad, id, g.id), adj);
      return;
    }
    case Op::kSquare:
      if (dep(n.a)) accumulate(n.a, mul(g, scale(va, 2.0)), adj);
      return;
    case Op::kAffine:
      if (dep(n.a)) accumulate(n.a, scale(g, n.c1), adj);
      return;
    case Op::kLinear: {
      if (dep(n.a)) accumulate(n.a, detail::matmul_t(g, vb, false, true), adj);
      if (dep(n.b)) accumulate(n.b, detail::matmul_t(va, g, true, false), adj);
      if (n.c >= 0 && depends[static_cast<std::size_t>(n.c)])
        accumulate(n.c, emit(Op::kSumAxis0, g.id, -1), adj);
      return;
    }
    case Op::kMulRows:
      if (dep(n.a)) accumulate(n.a, emit3(Op::kMulRows, g.id, n.b, -1), adj);
      if (dep(n.b)) accumulate(n.b, emit(Op::kSumAxis0, mul(g, va).id, -1), adj);
      return;
    case Op::kAddRows:
      if (dep(n.a)) accumulate(n.a, g, adj);
      if (dep(n.b)) accumulate(n.b, emit(Op::kSumAxis0, g.id, -1), adj);
      return;
    case Op::kTanhGrad:
      // out = g_in (1 - y^2): d/dy = -2 y g_in, d/dg_in = 1 - y^2.
      if (dep(n.a)) accumulate(n.a, mul(mul(g, vb), scale(va, -2.0)), adj);
      if (dep(n.b)) accumulate(n.b, emit(Op::kTanhGrad, n.a, g.id), adj);
      return;
  }
}

inline Var Tape::gradient(Var y, Var wrt) { return gradient_multi(y, {wrt})[0]; }

inline std::vector<Var> Tape::gradient_multi(Var y, const std::vector<Var>& wrt) {
  check_owned(y);
  if (!node(y.id).value.shape.empty())
    throw std::invalid_argument("gradient: loss must be a scalar, got shape " +
                                shape_str(node(y.id).value.shape));
  for (Var w : wrt) {
    check_owned(w);
    const Node& n = node(w.id);
    if (n.op == Op::kLeaf && !n.differentiable)
      throw std::invalid_argument("gradient: target was not registered as a differentiable input");
  }

  const std::size_t frozen = nodes_.size();
  std::vector<char> influences(frozen, 0);
  influences[static_cast<std::size_t>(y.id)] = 1;
  for (std::int64_t i = y.id; i >= 0; --i) {
    if (!influences[static_cast<std::size_t>(i)]) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.a >= 0) influences[static_cast<std::size_t>(n.a)] = 1;
    if (n.b >= 0) influences[static_cast<std::size_t>(n.b)] = 1;
    if (n.c >= 0) influences[static_cast<std::size_t>(n.c)] = 1;
  }
  std::vector<char> depends(frozen, 0);
  for (Var w : wrt) depends[static_cast<std::size_t>(w.id)] = 1;
  for (std::size_t i = 0; i < frozen; ++i) {
    if (depends[i]) continue;
    const Node& n = nodes_[i];
    if ((n.a >= 0 && depends[static_cast<std::size_t>(n.a)]) ||
        (n.b >= 0 && depends[static_cast<std::size_t>(n.b)]) ||
        (n.c >= 0 && depends[static_cast<std::size_t>(n.c)]))
      depends[i] = 1;
  }

  std::vector<std::int32_t> adj(frozen, -1);
  adj[static_cast<std::size_t>(y.id)] = constant(Tensor::scalar(1.0)).id;
  for (std::int64_t i = y.id; i >= 0; --i) {
    const std::size_t idx = static_cast<std::size_t>(i);
    if (!influences[idx] || !depends[idx] || adj[idx] < 0) continue;
    backward_step(static_cast<std::int32_t>(i), Var{this, adj[idx]}, depends, adj);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    std::int32_t gid = adj[static_cast<std::size_t>(w.id)];
    if (gid >= 0)
      out.push_back(Var{this, gid});
    else
      out.push_back(constant(Tensor::zeros(node(w.id).value.shape)));
  }
  return out;
}

}  // namespace pino
