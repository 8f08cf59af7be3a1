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

#include "lungseg/autograd/graph.hpp"
#include "lungseg/core/interp.hpp"

namespace lungseg::ag {

/// Bilinear resize (half-pixel centers, align-corners disabled) to an
/// arbitrary target size; used for both up- and down-sampling.
template <typename S>
Variable<S> resize_bilinear(const Variable<S>& x, Index oh, Index ow) {
  const Shape in = x.shape();
  if (in.h == oh && in.w == ow) {
    // Identity resize degenerates to a copy; keep the graph edge.
    Tensor<S> out = x.value();
    return Variable<S>::from_op(std::move(out), {x}, [xn = x.node()](Node<S>& self) {
      xn->accumulate(self.grad);
    });
  }
  const LinearAxisMap ym = make_linear_axis_map(in.h, oh);
  const LinearAxisMap xm = make_linear_axis_map(in.w, ow);
  Tensor<S> out = Tensor<S>::zeros(in.n, in.c, oh, ow);
  for (Index n = 0; n < in.n; ++n) {
    for (Index c = 0; c < in.c; ++c) {
      auto src = x.value().plane(n, c);
      auto dst = out.plane(n, c);
      for (Index oy = 0; oy < oh; ++oy) {
        const S ty = static_cast<S>(ym.t[oy]);
        for (Index ox = 0; ox < ow; ++ox) {
          const S tx = static_cast<S>(xm.t[ox]);
          const S top = (S(1) - tx) * src(ym.lo[oy], xm.lo[ox]) + tx * src(ym.lo[oy], xm.hi[ox]);
          const S bot = (S(1) - tx) * src(ym.hi[oy], xm.lo[ox]) + tx * src(ym.hi[oy], xm.hi[ox]);
          dst(oy, ox) = (S(1) - ty) * top + ty * bot;
        }
      }
    }
  }
  return Variable<S>::from_op(std::move(out), {x}, [xn = x.node(), ym, xm](Node<S>& self) {
    const Shape in = xn->value.shape();
    const Shape os = self.value.shape();
    Tensor<S> dx(in);
    for (Index n = 0; n < in.n; ++n) {
      for (Index c = 0; c < in.c; ++c) {
        auto g = self.grad.plane(n, c);
        auto acc = dx.plane(n, c);
        for (Index oy = 0; oy < os.h; ++oy) {
          const S ty = static_cast<S>(ym.t[oy]);
          for (Index ox = 0; ox < os.w; ++ox) {
            const S tx = static_cast<S>(xm.t[ox]);
            const S gv = g(oy, ox);
            acc(ym.lo[oy], xm.lo[ox]) += (S(1) - ty) * (S(1) - tx) * gv;
            acc(ym.lo[oy], xm.hi[ox]) += (S(1) - ty) * tx * gv;
            acc(ym.hi[oy], xm.lo[ox]) += ty * (S(1) - tx) * gv;
            acc(ym.hi[oy], xm.hi[ox]) += ty * tx * gv;
          }
        }
      }
    }
    xn->accumulate(dx);
  });
}

template <typename S>
Variable<S> resize_bilinear_like(const Variable<S>& x, const Shape& target) {
  return resize_bilinear(x, target.h, target.w);
}

/// Average pooling. With count_include_pad the divisor is always k*k (the
/// convention the hard-pixel weight map relies on); otherwise it is the
/// number of in-bounds taps.
template <typename S>
Variable<S> avg_pool(const Variable<S>& x, Index k, Index stride, Index pad,
                     bool count_include_pad = true) {
  const Shape in = x.shape();
  if (k <= 0 || stride <= 0 || pad < 0) throw ContractError("avg_pool: bad window parameters");
  const Index oh = (in.h + 2 * pad - k) / stride + 1;
  const Index ow = (in.w + 2 * pad - k) / stride + 1;
  if (oh <= 0 || ow <= 0)
    throw ContractError("avg_pool: window larger than padded input " + in.str());
  Tensor<S> out = Tensor<S>::zeros(in.n, in.c, oh, ow);
  for (Index n = 0; n < in.n; ++n) {
    for (Index c = 0; c < in.c; ++c) {
      auto src = x.value().plane(n, c);
      auto dst = out.plane(n, c);
      for (Index oy = 0; oy < oh; ++oy) {
        for (Index ox = 0; ox < ow; ++ox) {
          const Index y0 = oy * stride - pad, x0 = ox * stride - pad;
          S acc = S(0);
          Index count = 0;
          for (Index ky = 0; ky < k; ++ky) {
            const Index iy = y0 + ky;
            if (iy < 0 || iy >= in.h) continue;
            for (Index kx = 0; kx < k; ++kx) {
              const Index ix = x0 + kx;
              if (ix < 0 || ix >= in.w) continue;
              acc += src(iy, ix);
              ++count;
            }
          }
          const Index divisor = count_include_pad ? k * k : std::max<Index>(count, 1);
          dst(oy, ox) = acc / static_cast<S>(divisor);
        }
      }
    }
  }
  return Variable<S>::from_op(
      std::move(out), {x}, [xn = x.node(), k, stride, pad, count_include_pad](Node<S>& self) {
        const Shape in = xn->value.shape();
        const Shape os = self.value.shape();
        Tensor<S> dx(in);
        for (Index n = 0; n < in.n; ++n) {
          for (Index c = 0; c < in.c; ++c) {
            auto g = self.grad.plane(n, c);
            auto acc = dx.plane(n, c);
            for (Index oy = 0; oy < os.h; ++oy) {
              for (Index ox = 0; ox < os.w; ++ox) {
                const Index y0 = oy * stride - pad, x0 = ox * stride - pad;
                Index count = 0;
                if (!count_include_pad) {
                  for (Index ky = 0; ky < k; ++ky)
                    for (Index kx = 0; kx < k; ++kx) {
                      const Index iy = y0 + ky, ix = x0 + kx;
                      if (iy >= 0 && iy < in.h && ix >= 0 && ix < in.w) ++count;
                    }
                }
                const Index divisor = count_include_pad ? k * k : std::max<Index>(count, 1);
                const S gv = g(oy, ox) / static_cast<S>(divisor);
                for (Index ky = 0; ky < k; ++ky) {
                  const Index iy = y0 + ky;
                  if (iy < 0 || iy >= in.h) continue;
                  for (Index kx = 0; kx < k; ++kx) {
                    const Index ix = x0 + kx;
                    if (ix < 0 || ix >= in.w) continue;
                    acc(iy, ix) += gv;
                  }
                }
              }
            }
          }
        }
        xn->accumulate(dx);
      });
}

}  // namespace lungseg::ag
