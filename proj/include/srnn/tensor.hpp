// SPDX-License-Identifier: Apache-2.0

#ifndef SRNN_TENSOR_HPP
#define SRNN_TENSOR_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace srnn {

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 and 2 cover
// everything the runtime needs; higher ranks are representable but only
// exercised by serialization.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor vec(std::vector<double> data);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty() && shape_.empty(); }

  // Row/column count with rank-1 tensors treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace srnn

#endif
