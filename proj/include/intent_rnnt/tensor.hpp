#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace intent_rnnt {

// Dense row-major matrix of doubles with an optional gradient buffer of the
// same shape. Vectors are 1 x n tensors.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool has_grad() const { return grad_enabled_; }
  void enable_grad();
  void zero_grad();
  std::span<double> grad();
  std::span<const double> grad() const;

  bool all_finite() const;
  // Throws DimensionError naming `what` when any value is NaN or Inf.
  void check_finite(const char* what) const;

  // Rows [begin, end) as a new tensor without gradient.
  Tensor slice_rows(std::size_t begin, std::size_t end) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool grad_enabled_ = false;
};

Tensor matmul(const Tensor& a, const Tensor& b);

// Given dL/d(a*b), accumulates dL/da into a.grad() and dL/db into b.grad()
// for whichever inputs have gradients enabled.
void matmul_backward(Tensor& a, Tensor& b, const Tensor& d_out);

// out += x * w, where x has w.rows() entries and out has w.cols() entries.
// Every dense product in the library goes through this kernel so that
// row-at-a-time and whole-sequence evaluation are bit-identical.
void accumulate_vec_mat(std::span<const double> x, const Tensor& w, std::span<double> out);

// out += w * y, i.e. x-gradient of accumulate_vec_mat: y has w.cols()
// entries and out has w.rows() entries.
void accumulate_mat_vec(const Tensor& w, std::span<const double> y, std::span<double> out);

// w_grad += outer(x, y).
void accumulate_outer(std::span<const double> x, std::span<const double> y, std::span<double> w_grad,
                      std::size_t cols);

// Column-wise concatenation of equal-height tensors.
Tensor hconcat(const Tensor& left, const Tensor& right);

}  // namespace intent_rnnt
