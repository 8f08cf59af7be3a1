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
#include <vector>

#include "lungseg/core/tensor.hpp"

namespace lungseg {

/// Per-axis sampling plan for bilinear interpolation with half-pixel centers
/// (align-corners disabled): src = (dst + 0.5) * in/out - 0.5, clamped.
struct LinearAxisMap {
  std::vector<Index> lo, hi;
  std::vector<double> t;  // weight of hi; lo gets (1 - t)
};

inline LinearAxisMap make_linear_axis_map(Index in, Index out) {
  if (in <= 0 || out <= 0) throw ContractError("interpolation axis sizes must be positive");
  LinearAxisMap m;
  m.lo.resize(out);
  m.hi.resize(out);
  m.t.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Index i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src <= 0.0) {
      m.lo[i] = m.hi[i] = 0;
      m.t[i] = 0.0;
    } else if (src >= static_cast<double>(in - 1)) {
      m.lo[i] = m.hi[i] = in - 1;
      m.t[i] = 0.0;
    } else {
      Index lo = static_cast<Index>(std::floor(src));
      m.lo[i] = lo;
      m.hi[i] = lo + 1;
      m.t[i] = src - static_cast<double>(lo);
    }
  }
  return m;
}

/// Nearest-neighbor plan with the same half-pixel convention.
inline std::vector<Index> make_nearest_axis_map(Index in, Index out) {
  if (in <= 0 || out <= 0) throw ContractError("interpolation axis sizes must be positive");
  std::vector<Index> m(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Index i = 0; i < out; ++i) {
    Index src = static_cast<Index>(std::floor((static_cast<double>(i) + 0.5) * scale));
    m[i] = std::min(src, in - 1);
  }
  return m;
}

}  // namespace lungseg
