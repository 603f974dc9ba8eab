#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace intent_rnnt {

// log(sum(exp(v))) with max subtraction. Throws ArgumentError on empty input.
double log_sum_exp(std::span<const double> v);

// log(exp(a) + exp(b)); -inf inputs are allowed.
inline double log_add_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

std::vector<double> softmax(std::span<const double> v);
std::vector<double> log_softmax(std::span<const double> v);

// In-place variants used on hot paths.
void softmax_inplace(std::span<double> v);
void log_softmax_inplace(std::span<double> v);

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t argmax(std::span<const double> v);

}  // namespace intent_rnnt
