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

#include "lungseg/autograd/graph.hpp"

namespace lungseg::model {

/// All side outputs of one forward pass. Maps are logits except
/// `probability`, which is the sigmoid of the final map resized to the input
/// resolution. Fields are absent when the producing module is disabled.
template <typename S>
struct PredictionBundle {
  ag::Variable<S> global_map;              // coarse map; decoder output, or the
                                           // deepest side head when the decoder is off
  std::optional<ag::Variable<S>> side5;    // refinement outputs, deepest first
  std::optional<ag::Variable<S>> side4;
  std::optional<ag::Variable<S>> side3;
  std::optional<ag::Variable<S>> edge_logits;
  ag::Variable<S> final_map;               // side3 when refinement is on, else global_map
  ag::Variable<S> probability;
};

}  // namespace lungseg::model
