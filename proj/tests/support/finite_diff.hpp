#pragma once

// Central-difference oracles used by the differentiation tests.  These stay
// independent of the tape's backward pass: they only ever call forward
// evaluations of a user-supplied loss.

#include <cmath>
#include <functional>
#include <vector>

#include "pino/tensor.hpp"

namespace testsupport {

using LossFn = std::function<double(const std::vector<pino::Tensor>&)>;

inline std::vector<pino::Tensor> central_diff(const LossFn& f, std::vector<pino::Tensor> params,
                                              double h) {
  std::vector<pino::Tensor> grads;
  for (std::size_t p = 0; p < params.size(); ++p) {
    pino::Tensor g(params[p].shape);
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p].data[i];
      params[p].data[i] = orig + h;
      const double fp = f(params);
      params[p].data[i] = orig - h;
      const double fm = f(params);
      params[p].data[i] = orig;
      g.data[i] = (fp - fm) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

/// Max-norm relative error of a against reference b.
inline double rel_err(const pino::Tensor& a, const pino::Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::fabs(a.data[i] - b.data[i]));
    den = std::max(den, std::fabs(b.data[i]));
  }
  return num / std::max(den, 1e-12);
}

}  // namespace testsupport
