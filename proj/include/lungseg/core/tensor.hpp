// Copyright (c) 2026 The lungseg Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <sstream>
#include <string>
#include <utility>

#include "lungseg/core/error.hpp"

namespace lungseg {

using Index = Eigen::Index;

/// NCHW shape. Rank-4 covers every tensor in this project; scalars are
/// (1,1,1,1), per-channel vectors (1,C,1,1), and 2-D maps (N,1,H,W).
struct Shape {
  Index n = 0, c = 0, h = 0, w = 0;

  Index numel() const { return n * c * h * w; }
  bool operator==(const Shape& o) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
  }
};

inline Shape scalar_shape() { return Shape{1, 1, 1, 1}; }

/// Dense NCHW tensor over a scalar type, stored row-major contiguous and
/// backed by an Eigen array so elementwise math stays expression-based.
template <typename S>
class Tensor {
 public:
  using ArrayType = Eigen::Array<S, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstPlaneMap =
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(ArrayType::Zero(shape.numel())) {}
  Tensor(Shape shape, ArrayType data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel())
      throw ContractError("tensor data size does not match shape " + shape_.str());
  }

  static Tensor zeros(Index n, Index c, Index h, Index w) { return Tensor(Shape{n, c, h, w}); }
  static Tensor full(Shape shape, S v) {
    Tensor t(shape);
    t.data_.setConstant(v);
    return t;
  }
  static Tensor scalar(S v) { return full(scalar_shape(), v); }

  const Shape& shape() const { return shape_; }
  Index numel() const { return shape_.numel(); }
  bool is_scalar() const { return shape_ == scalar_shape(); }

  ArrayType& flat() { return data_; }
  const ArrayType& flat() const { return data_; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  S& operator()(Index n, Index c, Index y, Index x) {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  S operator()(Index n, Index c, Index y, Index x) const {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }

  /// H x W view of one channel plane.
  PlaneMap plane(Index n, Index c) {
    return PlaneMap(data_.data() + (n * shape_.c + c) * shape_.h * shape_.w, shape_.h, shape_.w);
  }
  ConstPlaneMap plane(Index n, Index c) const {
    return ConstPlaneMap(data_.data() + (n * shape_.c + c) * shape_.h * shape_.w, shape_.h,
                         shape_.w);
  }

  S item() const {
    if (!is_scalar()) throw ContractError("item() on non-scalar tensor " + shape_.str());
    return data_[0];
  }

  template <typename T>
  Tensor<T> cast() const {
    return Tensor<T>(shape_, data_.template cast<T>());
  }

  bool all_finite() const { return data_.isFinite().all(); }

 private:
  Shape shape_;
  ArrayType data_;
};

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
  if (!(a.shape() == b.shape()))
    throw ContractError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                        b.shape().str());
}

}  // namespace lungseg
