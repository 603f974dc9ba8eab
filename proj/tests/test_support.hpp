#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "intent_rnnt/random.hpp"
#include "intent_rnnt/tensor.hpp"

namespace testing {

using intent_rnnt::Rng;
using intent_rnnt::Tensor;

inline Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

// Central differences of `loss` with respect to every entry of `x`.
inline std::vector<double> numeric_grad(const std::function<double()>& loss, std::span<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace testing
