#include "intent_rnnt/math.hpp"

#include <algorithm>

#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("log_sum_exp of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  if (m == -INFINITY) return -INFINITY;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

void log_softmax_inplace(std::span<double> v) {
  const double lse = log_sum_exp(v);
  for (double& x : v) x -= lse;
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) throw ArgumentError("softmax of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  softmax_inplace(out);
  return out;
}

std::vector<double> log_softmax(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  log_softmax_inplace(out);
  return out;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace intent_rnnt
