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

#include <cmath>
#include <limits>
#include <utility>

#include "lungseg/autograd/graph.hpp"

// Elementwise and reduction ops. Binary ops are strictly same-shape; scalar
// constants go through the *_scalar variants, and broadcasting is confined to
// the dedicated structural ops (bias in conv2d, expand_channels).

namespace lungseg::ag {

template <typename S>
Variable<S> add(const Variable<S>& a, const Variable<S>& b) {
  check_same_shape(a.value(), b.value(), "add");
  Tensor<S> out(a.shape(), a.value().flat() + b.value().flat());
  return Variable<S>::from_op(std::move(out), {a, b}, [an = a.node(), bn = b.node()](Node<S>& self) {
    if (an->requires_grad) an->accumulate(self.grad);
    if (bn->requires_grad) bn->accumulate(self.grad);
  });
}

template <typename S>
Variable<S> sub(const Variable<S>& a, const Variable<S>& b) {
  check_same_shape(a.value(), b.value(), "sub");
  Tensor<S> out(a.shape(), a.value().flat() - b.value().flat());
  return Variable<S>::from_op(std::move(out), {a, b}, [an = a.node(), bn = b.node()](Node<S>& self) {
    if (an->requires_grad) an->accumulate(self.grad);
    if (bn->requires_grad) bn->accumulate_flat(-self.grad.flat());
  });
}

template <typename S>
Variable<S> mul(const Variable<S>& a, const Variable<S>& b) {
  check_same_shape(a.value(), b.value(), "mul");
  Tensor<S> out(a.shape(), a.value().flat() * b.value().flat());
  return Variable<S>::from_op(std::move(out), {a, b}, [an = a.node(), bn = b.node()](Node<S>& self) {
    if (an->requires_grad) an->accumulate_flat(self.grad.flat() * bn->value.flat());
    if (bn->requires_grad) bn->accumulate_flat(self.grad.flat() * an->value.flat());
  });
}

template <typename S>
Variable<S> div(const Variable<S>& a, const Variable<S>& b) {
  check_same_shape(a.value(), b.value(), "div");
  Tensor<S> out(a.shape(), a.value().flat() / b.value().flat());
  return Variable<S>::from_op(std::move(out), {a, b}, [an = a.node(), bn = b.node()](Node<S>& self) {
    if (an->requires_grad) an->accumulate_flat(self.grad.flat() / bn->value.flat());
    if (bn->requires_grad)
      bn->accumulate_flat(-self.grad.flat() * an->value.flat() / bn->value.flat().square());
  });
}

template <typename S>
Variable<S> add_scalar(const Variable<S>& a, S s) {
  Tensor<S> out(a.shape(), a.value().flat() + s);
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node()](Node<S>& self) {
    an->accumulate(self.grad);
  });
}

template <typename S>
Variable<S> mul_scalar(const Variable<S>& a, S s) {
  Tensor<S> out(a.shape(), a.value().flat() * s);
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node(), s](Node<S>& self) {
    an->accumulate_flat(self.grad.flat() * s);
  });
}

/// s - a
template <typename S>
Variable<S> rsub_scalar(S s, const Variable<S>& a) {
  Tensor<S> out(a.shape(), s - a.value().flat());
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node()](Node<S>& self) {
    an->accumulate_flat(-self.grad.flat());
  });
}

template <typename S>
Variable<S> sigmoid(const Variable<S>& a) {
  Tensor<S> out(a.shape(), S(1) / (S(1) + (-a.value().flat()).exp()));
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node()](Node<S>& self) {
    const auto& y = self.value.flat();
    an->accumulate_flat(self.grad.flat() * y * (S(1) - y));
  });
}

template <typename S>
Variable<S> relu(const Variable<S>& a) {
  Tensor<S> out(a.shape(), a.value().flat().max(S(0)));
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node()](Node<S>& self) {
    an->accumulate_flat(self.grad.flat() * (an->value.flat() > S(0)).template cast<S>());
  });
}

template <typename S>
Variable<S> abs_t(const Variable<S>& a) {
  Tensor<S> out(a.shape(), a.value().flat().abs());
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node()](Node<S>& self) {
    an->accumulate_flat(self.grad.flat() * an->value.flat().sign());
  });
}

template <typename S>
Variable<S> clamp(const Variable<S>& a, S lo, S hi) {
  Tensor<S> out(a.shape(), a.value().flat().max(lo).min(hi));
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node(), lo, hi](Node<S>& self) {
    auto inside = (an->value.flat() > lo && an->value.flat() < hi).template cast<S>();
    an->accumulate_flat(self.grad.flat() * inside);
  });
}

template <typename S>
Variable<S> sum(const Variable<S>& a) {
  Tensor<S> out = Tensor<S>::scalar(a.value().flat().sum());
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node()](Node<S>& self) {
    S g = self.grad.flat()[0];
    an->accumulate_flat(Tensor<S>::full(an->value.shape(), g).flat());
  });
}

template <typename S>
Variable<S> mean(const Variable<S>& a) {
  const S inv_n = S(1) / static_cast<S>(a.value().numel());
  Tensor<S> out = Tensor<S>::scalar(a.value().flat().sum() * inv_n);
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node(), inv_n](Node<S>& self) {
    S g = self.grad.flat()[0] * inv_n;
    an->accumulate_flat(Tensor<S>::full(an->value.shape(), g).flat());
  });
}

/// Replicates a single-channel map to `channels` identical channels.
template <typename S>
Variable<S> expand_channels(const Variable<S>& a, Index channels) {
  const Shape in = a.shape();
  if (in.c != 1) throw ContractError("expand_channels expects a single-channel input");
  Tensor<S> out = Tensor<S>::zeros(in.n, channels, in.h, in.w);
  for (Index n = 0; n < in.n; ++n)
    for (Index c = 0; c < channels; ++c) out.plane(n, c) = a.value().plane(n, 0);
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node(), channels](Node<S>& self) {
    const Shape in = an->value.shape();
    Tensor<S> da(in);
    for (Index n = 0; n < in.n; ++n) {
      auto acc = da.plane(n, 0);
      for (Index c = 0; c < channels; ++c) acc += self.grad.plane(n, c);
    }
    an->accumulate(da);
  });
}

template <typename S>
Variable<S> slice_channels(const Variable<S>& a, Index from, Index count) {
  const Shape in = a.shape();
  if (from < 0 || count <= 0 || from + count > in.c)
    throw ContractError("slice_channels: range outside " + in.str());
  Tensor<S> out = Tensor<S>::zeros(in.n, count, in.h, in.w);
  for (Index n = 0; n < in.n; ++n)
    for (Index c = 0; c < count; ++c) out.plane(n, c) = a.value().plane(n, from + c);
  return Variable<S>::from_op(std::move(out), {a}, [an = a.node(), from, count](Node<S>& self) {
    const Shape in = an->value.shape();
    Tensor<S> da(in);
    for (Index n = 0; n < in.n; ++n)
      for (Index c = 0; c < count; ++c) da.plane(n, from + c) = self.grad.plane(n, c);
    an->accumulate(da);
  });
}

template <typename S>
Variable<S> concat_channels(const Variable<S>& a, const Variable<S>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw ContractError("concat_channels: spatial/batch mismatch " + sa.str() + " vs " + sb.str());
  Tensor<S> out = Tensor<S>::zeros(sa.n, sa.c + sb.c, sa.h, sa.w);
  for (Index n = 0; n < sa.n; ++n) {
    for (Index c = 0; c < sa.c; ++c) out.plane(n, c) = a.value().plane(n, c);
    for (Index c = 0; c < sb.c; ++c) out.plane(n, sa.c + c) = b.value().plane(n, c);
  }
  return Variable<S>::from_op(std::move(out), {a, b}, [an = a.node(), bn = b.node()](Node<S>& self) {
    const Shape sa = an->value.shape(), sb = bn->value.shape();
    if (an->requires_grad) {
      Tensor<S> da(sa);
      for (Index n = 0; n < sa.n; ++n)
        for (Index c = 0; c < sa.c; ++c) da.plane(n, c) = self.grad.plane(n, c);
      an->accumulate(da);
    }
    if (bn->requires_grad) {
      Tensor<S> db(sb);
      for (Index n = 0; n < sb.n; ++n)
        for (Index c = 0; c < sb.c; ++c) db.plane(n, c) = self.grad.plane(n, sa.c + c);
      bn->accumulate(db);
    }
  });
}

/// Weighted-mean binary cross entropy on logits, fused for numerical
/// stability: per pixel, bce = max(z,0) - z*t + log(1 + exp(-|z|)), the exact
/// limit of the clamped-probability form as the clamp tightens. Targets and
/// weights are treated as constants. Returns sum(w * bce) / sum(w).
template <typename S>
Variable<S> bce_with_logits_mean(const Variable<S>& logits, const Tensor<S>& targets,
                                 const Tensor<S>& weights) {
  check_same_shape(logits.value(), targets, "bce_with_logits_mean targets");
  check_same_shape(logits.value(), weights, "bce_with_logits_mean weights");
  const auto& z = logits.value().flat();
  const auto& t = targets.flat();
  const auto& w = weights.flat();
  const S wsum = w.sum();
  if (!(wsum > S(0))) throw ContractError("bce_with_logits_mean: weights sum to zero");
  typename Tensor<S>::ArrayType bce =
      z.max(S(0)) - z * t + (S(1) + (-z.abs()).exp()).log();
  Tensor<S> out = Tensor<S>::scalar((w * bce).sum() / wsum);
  return Variable<S>::from_op(
      std::move(out), {logits},
      [zn = logits.node(), t, w, wsum](Node<S>& self) {
        S g = self.grad.flat()[0];
        auto p = S(1) / (S(1) + (-zn->value.flat()).exp());
        zn->accumulate_flat(g / wsum * w * (p - t));
      });
}

/// Mean pixel-wise softmax cross entropy for integer class labels. Logits are
/// (N, K, H, W); labels are (N, 1, H, W) holding values in [0, K).
template <typename S>
Variable<S> softmax_ce_mean(const Variable<S>& logits, const Tensor<S>& labels) {
  const Shape ls = logits.shape();
  if (!(labels.shape() == Shape{ls.n, 1, ls.h, ls.w}))
    throw ContractError("softmax_ce_mean: label shape " + labels.shape().str() +
                        " does not match logits " + ls.str());
  const Index npix = ls.n * ls.h * ls.w;
  // Per-pixel log-sum-exp with max subtraction.
  Tensor<S> prob(ls);
  S loss = S(0);
  for (Index n = 0; n < ls.n; ++n) {
    for (Index y = 0; y < ls.h; ++y) {
      for (Index x = 0; x < ls.w; ++x) {
        S zmax = logits.value()(n, 0, y, x);
        for (Index k = 1; k < ls.c; ++k) zmax = std::max(zmax, logits.value()(n, k, y, x));
        S denom = S(0);
        for (Index k = 0; k < ls.c; ++k) {
          S e = std::exp(logits.value()(n, k, y, x) - zmax);
          prob(n, k, y, x) = e;
          denom += e;
        }
        for (Index k = 0; k < ls.c; ++k) prob(n, k, y, x) /= denom;
        const Index lbl = static_cast<Index>(labels(n, 0, y, x));
        if (lbl < 0 || lbl >= ls.c) throw ValidationError("softmax_ce_mean: label out of range");
        loss -= std::log(std::max(prob(n, lbl, y, x), std::numeric_limits<S>::min()));
      }
    }
  }
  Tensor<S> out = Tensor<S>::scalar(loss / static_cast<S>(npix));
  return Variable<S>::from_op(
      std::move(out), {logits},
      [zn = logits.node(), prob = std::move(prob), labels, npix](Node<S>& self) {
        const Shape ls = zn->value.shape();
        S g = self.grad.flat()[0] / static_cast<S>(npix);
        Tensor<S> dz = prob;
        for (Index n = 0; n < ls.n; ++n)
          for (Index y = 0; y < ls.h; ++y)
            for (Index x = 0; x < ls.w; ++x)
              dz(n, static_cast<Index>(labels(n, 0, y, x)), y, x) -= S(1);
        dz.flat() *= g;
        zn->accumulate(dz);
      });
}

}  // namespace lungseg::ag
