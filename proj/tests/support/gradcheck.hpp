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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lungseg/autograd/graph.hpp"

namespace lungseg::testing {

/// Compares reverse-mode gradients of a scalar loss against central finite
/// differences, perturbing every element of every leaf. `build_loss` must
/// rebuild the graph from the leaves' current values on each call. Returns
/// the worst relative error over all elements.
inline double max_grad_rel_error(const std::function<ag::Variable<double>()>& build_loss,
                                 std::vector<ag::Variable<double>> leaves, double h = 3e-5,
                                 double denom_floor = 1e-5) {
  for (auto& leaf : leaves) leaf.zero_grad();
  auto loss = build_loss();
  loss.backward();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) analytic.push_back(leaf.grad());

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& value = leaves[li].value();
    for (Index i = 0; i < value.numel(); ++i) {
      const double orig = value.flat()[i];
      value.flat()[i] = orig + h;
      const double lp = build_loss().value().item();
      value.flat()[i] = orig - h;
      const double lm = build_loss().value().item();
      value.flat()[i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[li].flat()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), denom_floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace lungseg::testing
