#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pino {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

/// Dense row-major array of 64-bit floats; rank 0 (scalar) through rank 2 are
/// used throughout, higher ranks are permitted by construction but no op
/// produces them.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), 0.0) {}
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel(shape))
      throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }
  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor ones(Shape s) { return full(std::move(s), 1.0); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  bool all_finite() const {
    // x * 0 is 0 for finite x and NaN otherwise; the accumulation vectorizes
    // where a per-element isfinite branch would not.
    double probe = 0.0;
    for (double v : data) probe += v * 0.0;
    return probe == 0.0;
  }

  bool operator==(const Tensor& o) const { return shape == o.shape && data == o.data; }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

/// Stack rank-2 (or rank-1) tensors vertically; used when assembling model
/// inputs from boundary groups.
inline Tensor vstack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no tensors given");
  std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw std::invalid_argument("vstack: column mismatch " + shape_str(p.shape));
    rows += p.rows();
  }
  Tensor out(Shape{rows, cols});
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + at);
    at += p.size();
  }
  return out;
}

/// Concatenate rank-2 tensors along columns (equal row counts).
inline Tensor hstack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("hstack: no tensors given");
  std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw std::invalid_argument("hstack: row mismatch " + shape_str(p.shape));
    cols += p.cols();
  }
  Tensor out(Shape{rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t c = 0;
    for (const auto& p : parts) {
      for (std::size_t j = 0; j < p.cols(); ++j) out.at(i, c++) = p.at(i, j);
    }
  }
  return out;
}

}  // namespace pino
