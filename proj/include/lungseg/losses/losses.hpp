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

#include <optional>

#include "lungseg/autograd/ops.hpp"
#include "lungseg/autograd/spatial.hpp"
#include "lungseg/model/bundle.hpp"

// Supervision stack: edge BCE, hard-pixel weight maps, weighted BCE + IoU
// segmentation loss, and the deeply supervised total. Every term is a mean
// over its tensor, so magnitudes are independent of resolution and batch
// size.

namespace lungseg::losses {

template <typename S>
struct LossWeights {
  S lambda = S(1);           // BCE share inside the segmentation loss
  S hard_pixel_gain = S(5);  // gain on |avgpool(G) - G|
  Index pool_window = 31;    // odd window of the hard-pixel average pool
  S epsilon = S(1e-8);       // guards IoU ratios against 0/0

  void validate() const {
    if (lambda < S(0)) throw ContractError("loss lambda must be >= 0");
    if (pool_window <= 0 || pool_window % 2 == 0)
      throw ContractError("hard-pixel pool window must be odd and positive");
  }
};

/// Edge supervision: BCE between the edge logits (upsampled to the edge
/// ground truth's resolution) and the edge map, averaged over pixels.
template <typename S>
ag::Variable<S> edge_loss(const ag::Variable<S>& edge_logits, const Tensor<S>& edge_gt) {
  const Shape gs = edge_gt.shape();
  auto up = ag::resize_bilinear(edge_logits, gs.h, gs.w);
  check_same_shape(up.value(), edge_gt, "edge_loss");
  return ag::bce_with_logits_mean(up, edge_gt, Tensor<S>::full(gs, S(1)));
}

/// Hard-pixel emphasis: w = 1 + gain * |avgpool_k(G) - G| with a stride-1,
/// zero-padded window whose divisor is always k*k. Pixels near label
/// transitions get up to 1 + gain.
template <typename S>
ag::Variable<S> hard_pixel_weights(const ag::Variable<S>& mask, S gain = S(5),
                                   Index window = 31) {
  if (window <= 0 || window % 2 == 0)
    throw ContractError("hard_pixel_weights: window must be odd and positive");
  auto pooled = ag::avg_pool(mask, window, 1, (window - 1) / 2, /*count_include_pad=*/true);
  return ag::add_scalar(ag::mul_scalar(ag::abs_t(ag::sub(pooled, mask)), gain), S(1));
}

/// sum(w * bce) / sum(w) on logits already at the target's resolution.
template <typename S>
ag::Variable<S> weighted_bce(const ag::Variable<S>& logits, const Tensor<S>& target,
                             const Tensor<S>& weights) {
  return ag::bce_with_logits_mean(logits, target, weights);
}

/// 1 - (sum(w*p*g) + eps) / (sum(w*(p + g - p*g)) + eps) with p = sigmoid(logits).
template <typename S>
ag::Variable<S> weighted_iou(const ag::Variable<S>& logits, const Tensor<S>& target,
                             const Tensor<S>& weights, S eps = S(1e-8)) {
  check_same_shape(logits.value(), target, "weighted_iou target");
  check_same_shape(logits.value(), weights, "weighted_iou weights");
  auto p = ag::sigmoid(logits);
  auto g = ag::constant(target);
  auto w = ag::constant(weights);
  auto pg = ag::mul(p, g);
  auto inter = ag::sum(ag::mul(w, pg));
  auto uni = ag::sum(ag::mul(w, ag::sub(ag::add(p, g), pg)));
  return ag::rsub_scalar(S(1),
                         ag::div(ag::add_scalar(inter, eps), ag::add_scalar(uni, eps)));
}

/// L_seg = weighted IoU + lambda * weighted BCE at the ground truth's
/// resolution; the side output is upsampled first.
template <typename S>
ag::Variable<S> segmentation_loss(const ag::Variable<S>& side_logits, const Tensor<S>& seg_gt,
                                  const Tensor<S>& weights, const LossWeights<S>& lw) {
  const Shape gs = seg_gt.shape();
  auto up = ag::resize_bilinear(side_logits, gs.h, gs.w);
  auto iou = weighted_iou(up, seg_gt, weights, lw.epsilon);
  if (lw.lambda == S(0)) return iou;
  return ag::add(iou, ag::mul_scalar(weighted_bce(up, seg_gt, weights), lw.lambda));
}

/// The deep-supervision total with a per-term breakdown for logging. Terms
/// whose side output is absent under an ablation are skipped and stay unset
/// in the breakdown.
template <typename S>
struct LossBreakdown {
  ag::Variable<S> total;
  std::optional<double> seg_global, edge, seg3, seg4, seg5;

  static constexpr const char* kCsvHeader = "step,seg_global,edge,seg3,seg4,seg5,total";
};

template <typename S>
LossBreakdown<S> total_loss(const model::PredictionBundle<S>& bundle, const Tensor<S>& seg_gt,
                            const Tensor<S>& edge_gt, const LossWeights<S>& lw = {}) {
  lw.validate();
  const Tensor<S> weights =
      hard_pixel_weights(ag::constant(seg_gt), lw.hard_pixel_gain, lw.pool_window).value();

  LossBreakdown<S> out;
  auto add_term = [&](const ag::Variable<S>& term) {
    out.total = out.total.defined() ? ag::add(out.total, term) : term;
  };

  auto seg_global = segmentation_loss(bundle.global_map, seg_gt, weights, lw);
  out.seg_global = static_cast<double>(seg_global.value().item());
  add_term(seg_global);

  if (bundle.edge_logits) {
    auto e = edge_loss(*bundle.edge_logits, edge_gt);
    out.edge = static_cast<double>(e.value().item());
    add_term(e);
  }
  if (bundle.side3) {
    auto t = segmentation_loss(*bundle.side3, seg_gt, weights, lw);
    out.seg3 = static_cast<double>(t.value().item());
    add_term(t);
  }
  if (bundle.side4) {
    auto t = segmentation_loss(*bundle.side4, seg_gt, weights, lw);
    out.seg4 = static_cast<double>(t.value().item());
    add_term(t);
  }
  if (bundle.side5) {
    auto t = segmentation_loss(*bundle.side5, seg_gt, weights, lw);
    out.seg5 = static_cast<double>(t.value().item());
    add_term(t);
  }
  return out;
}

}  // namespace lungseg::losses
