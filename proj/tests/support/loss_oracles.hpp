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

#include "lungseg/core/tensor.hpp"

// Scalar-loop references for the loss stack, written straight from the
// definitions and kept independent of the autograd implementations.

namespace lungseg::testing {

inline double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Clamped-probability BCE, weighted mean.
inline double bce_oracle(const Tensor<double>& logits, const Tensor<double>& target,
                         const Tensor<double>& weights, double clamp_eps = 1e-12) {
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < logits.numel(); ++i) {
    double p = sigmoid_scalar(logits.flat()[i]);
    p = std::min(std::max(p, clamp_eps), 1.0 - clamp_eps);
    const double t = target.flat()[i];
    num += weights.flat()[i] * -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    den += weights.flat()[i];
  }
  return num / den;
}

inline double iou_oracle(const Tensor<double>& logits, const Tensor<double>& target,
                         const Tensor<double>& weights, double eps = 1e-8) {
  double inter = 0.0, uni = 0.0;
  for (Index i = 0; i < logits.numel(); ++i) {
    const double p = sigmoid_scalar(logits.flat()[i]);
    const double g = target.flat()[i];
    const double w = weights.flat()[i];
    inter += w * p * g;
    uni += w * (p + g - p * g);
  }
  return 1.0 - (inter + eps) / (uni + eps);
}

/// w = 1 + gain * |boxmean_k(G) - G| with zero padding and divisor k*k.
inline Tensor<double> hard_pixel_weights_oracle(const Tensor<double>& mask, double gain,
                                                Index window) {
  const Shape sh = mask.shape();
  Tensor<double> out(sh);
  const Index half = (window - 1) / 2;
  for (Index n = 0; n < sh.n; ++n)
    for (Index c = 0; c < sh.c; ++c)
      for (Index y = 0; y < sh.h; ++y)
        for (Index x = 0; x < sh.w; ++x) {
          double acc = 0.0;
          for (Index dy = -half; dy <= half; ++dy)
            for (Index dx = -half; dx <= half; ++dx) {
              const Index yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= sh.h || xx < 0 || xx >= sh.w) continue;
              acc += mask(n, c, yy, xx);
            }
          const double avg = acc / static_cast<double>(window * window);
          out(n, c, y, x) = 1.0 + gain * std::abs(avg - mask(n, c, y, x));
        }
  return out;
}

}  // namespace lungseg::testing
