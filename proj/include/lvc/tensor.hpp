// Copyright (c) the LVC project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LVC_TENSOR_HPP_
#define LVC_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lvc/common.hpp"

namespace lvc {

// Dense row-major double tensor. Double precision throughout: the entropy
// coder needs platform-stable CDF construction and the gradient checks run
// against 1e-4 relative tolerances.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), 0.0);
  }
  Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), fill);
  }
  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != count(shape_))
      throw DimensionError("tensor data size does not match shape");
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  // Indexed access for up to 5 dims (row-major).
  double& at(int a, int b) { return data_[static_cast<size_t>(a) * shape_[1] + b]; }
  double at(int a, int b) const { return data_[static_cast<size_t>(a) * shape_[1] + b]; }
  double& at(int a, int b, int c) {
    return data_[(static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double at(int a, int b, int c) const {
    return data_[(static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double& at(int a, int b, int c, int d) {
    return data_[((static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at(int a, int b, int c, int d) const {
    return data_[((static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double& at(int a, int b, int c, int d, int e) {
    return data_[(((static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d) *
                     shape_[4] +
                 e];
  }
  double at(int a, int b, int c, int d, int e) const {
    return data_[(((static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d) *
                     shape_[4] +
                 e];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor reshaped(std::vector<int> shape) const {
    Tensor t;
    if (count(shape) != numel()) throw DimensionError("reshape element count mismatch");
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = shape.empty() ? 0 : 1;
    for (int d : shape) n *= d;
    return n;
  }

  static std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace lvc

#endif  // LVC_TENSOR_HPP_
