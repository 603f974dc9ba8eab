#include "intent_rnnt/tensor.hpp"

#include <cmath>
#include <sstream>

#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    std::ostringstream msg;
    msg << "tensor data length " << data_.size() << " does not match shape " << rows << "x" << cols;
    throw DimensionError(msg.str());
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged initializer for tensor");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

void Tensor::enable_grad() {
  grad_enabled_ = true;
  grad_.assign(data_.size(), 0.0);
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

std::span<double> Tensor::grad() {
  if (!has_grad()) throw ArgumentError("tensor has no gradient buffer");
  return grad_;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ArgumentError("tensor has no gradient buffer");
  return grad_;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::check_finite(const char* what) const {
  if (!all_finite()) throw DimensionError(std::string("non-finite value in ") + what);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw DimensionError("row slice out of range");
  return Tensor(end - begin, cols_,
                std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                    data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
}

void accumulate_vec_mat(std::span<const double> x, const Tensor& w, std::span<double> out) {
  const std::size_t n = w.cols();
  const double* wd = w.data().data();
  double* o = out.data();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    const double* wr = wd + k * n;
    for (std::size_t j = 0; j < n; ++j) o[j] += xk * wr[j];
  }
}

void accumulate_mat_vec(const Tensor& w, std::span<const double> y, std::span<double> out) {
  const std::size_t n = w.cols();
  const double* wd = w.data().data();
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double* wr = wd + k * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * y[j];
    out[k] += acc;
  }
}

void accumulate_outer(std::span<const double> x, std::span<const double> y, std::span<double> w_grad,
                      std::size_t cols) {
  double* g = w_grad.data();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    double* gr = g + k * cols;
    for (std::size_t j = 0; j < cols; ++j) gr[j] += xk * y[j];
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream msg;
    msg << "matmul shape mismatch: " << a.rows() << "x" << a.cols() << " * " << b.rows() << "x" << b.cols();
    throw DimensionError(msg.str());
  }
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) accumulate_vec_mat(a.row(i), b, out.row(i));
  return out;
}

void matmul_backward(Tensor& a, Tensor& b, const Tensor& d_out) {
  if (d_out.rows() != a.rows() || d_out.cols() != b.cols() || a.cols() != b.rows())
    throw DimensionError("matmul_backward shape mismatch");
  if (a.has_grad()) {
    auto ga = a.grad();
    for (std::size_t i = 0; i < a.rows(); ++i)
      accumulate_mat_vec(b, d_out.row(i), ga.subspan(i * a.cols(), a.cols()));
  }
  if (b.has_grad()) {
    auto gb = b.grad();
    for (std::size_t i = 0; i < a.rows(); ++i) accumulate_outer(a.row(i), d_out.row(i), gb, b.cols());
  }
}

Tensor hconcat(const Tensor& left, const Tensor& right) {
  if (left.rows() != right.rows()) throw DimensionError("hconcat row mismatch");
  Tensor out(left.rows(), left.cols() + right.cols());
  for (std::size_t r = 0; r < left.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(left.row(r).begin(), left.row(r).end(), dst.begin());
    std::copy(right.row(r).begin(), right.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(left.cols()));
  }
  return out;
}

}  // namespace intent_rnnt
