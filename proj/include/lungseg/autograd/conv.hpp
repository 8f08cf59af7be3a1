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

#include <utility>

#include "lungseg/autograd/graph.hpp"

namespace lungseg::ag {

namespace detail {

template <typename S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMajorMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Patch matrix of one sample: rows index (ic, ky, kx), columns index output
/// pixels. Out-of-bounds taps contribute zero.
template <typename S>
MatrixT<S> im2col(const Tensor<S>& x, Index n, Index kh, Index kw, Index stride, Index pad,
                  Index oh, Index ow) {
  const Shape in = x.shape();
  MatrixT<S> cols = MatrixT<S>::Zero(in.c * kh * kw, oh * ow);
  for (Index c = 0; c < in.c; ++c) {
    auto src = x.plane(n, c);
    for (Index ky = 0; ky < kh; ++ky) {
      for (Index kx = 0; kx < kw; ++kx) {
        const Index row = (c * kh + ky) * kw + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in.h) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= in.w) continue;
            cols(row, oy * ow + ox) = src(iy, ix);
          }
        }
      }
    }
  }
  return cols;
}

template <typename S>
void col2im_accumulate(const MatrixT<S>& cols, Tensor<S>& dx, Index n, Index kh, Index kw,
                       Index stride, Index pad, Index oh, Index ow) {
  const Shape in = dx.shape();
  for (Index c = 0; c < in.c; ++c) {
    auto dst = dx.plane(n, c);
    for (Index ky = 0; ky < kh; ++ky) {
      for (Index kx = 0; kx < kw; ++kx) {
        const Index row = (c * kh + ky) * kw + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in.h) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= in.w) continue;
            dst(iy, ix) += cols(row, oy * ow + ox);
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D convolution, NCHW, square stride/padding. Weight is (OC, IC, KH, KW),
/// bias (1, OC, 1, 1) or an undefined Variable for none. Lowered to a GEMM
/// per sample via im2col; the backward pass re-runs im2col instead of caching
/// patch matrices.
template <typename S>
Variable<S> conv2d(const Variable<S>& x, const Variable<S>& weight, const Variable<S>& bias,
                   Index stride = 1, Index pad = 0) {
  const Shape in = x.shape();
  const Shape ws = weight.shape();
  if (in.c != ws.c)
    throw ContractError("conv2d: input channels " + in.str() + " vs weight " + ws.str());
  if (stride <= 0 || pad < 0) throw ContractError("conv2d: bad stride/padding");
  const Index oh = (in.h + 2 * pad - ws.h) / stride + 1;
  const Index ow = (in.w + 2 * pad - ws.w) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ContractError("conv2d: kernel larger than padded input");
  const bool has_bias = bias.defined();
  if (has_bias && !(bias.shape() == Shape{1, ws.n, 1, 1}))
    throw ContractError("conv2d: bias shape must be (1,OC,1,1)");

  Tensor<S> out = Tensor<S>::zeros(in.n, ws.n, oh, ow);
  detail::ConstRowMajorMap<S> wmat(weight.value().data(), ws.n, ws.c * ws.h * ws.w);
  for (Index n = 0; n < in.n; ++n) {
    auto cols = detail::im2col(x.value(), n, ws.h, ws.w, stride, pad, oh, ow);
    detail::RowMajorMap<S> y(out.data() + n * ws.n * oh * ow, ws.n, oh * ow);
    y.noalias() = wmat * cols;
  }
  if (has_bias) {
    for (Index n = 0; n < in.n; ++n)
      for (Index c = 0; c < ws.n; ++c) out.plane(n, c) += bias.value()(0, c, 0, 0);
  }

  std::vector<Variable<S>> parents = {x, weight};
  if (has_bias) parents.push_back(bias);
  auto backward = [xn = x.node(), wn = weight.node(),
                   bn = has_bias ? bias.node() : typename Variable<S>::NodePtr(), stride, pad, oh,
                   ow](Node<S>& self) {
    const Shape in = xn->value.shape();
    const Shape ws = wn->value.shape();
    detail::ConstRowMajorMap<S> wmat(wn->value.data(), ws.n, ws.c * ws.h * ws.w);
    const bool need_dx = xn->requires_grad;
    const bool need_dw = wn->requires_grad;
    Tensor<S> dx = need_dx ? Tensor<S>(in) : Tensor<S>();
    detail::MatrixT<S> dw = detail::MatrixT<S>::Zero(ws.n, ws.c * ws.h * ws.w);
    for (Index n = 0; n < in.n; ++n) {
      detail::ConstRowMajorMap<S> g(self.grad.data() + n * ws.n * oh * ow, ws.n, oh * ow);
      if (need_dw) {
        auto cols = detail::im2col(xn->value, n, ws.h, ws.w, stride, pad, oh, ow);
        dw.noalias() += g * cols.transpose();
      }
      if (need_dx) {
        detail::MatrixT<S> dcols = wmat.transpose() * g;
        detail::col2im_accumulate(dcols, dx, n, ws.h, ws.w, stride, pad, oh, ow);
      }
    }
    if (need_dx) xn->accumulate(dx);
    if (need_dw) {
      Tensor<S> dwt(ws);
      detail::RowMajorMap<S>(dwt.data(), ws.n, ws.c * ws.h * ws.w) = dw;
      wn->accumulate(dwt);
    }
    if (bn && bn->requires_grad) {
      Tensor<S> db = Tensor<S>::zeros(1, ws.n, 1, 1);
      for (Index n = 0; n < in.n; ++n)
        for (Index c = 0; c < ws.n; ++c) db(0, c, 0, 0) += self.grad.plane(n, c).sum();
      bn->accumulate(db);
    }
  };
  return Variable<S>::from_op(std::move(out), std::move(parents), std::move(backward));
}

}  // namespace lungseg::ag
