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

#include <string>
#include <vector>

#include "lungseg/core/error.hpp"
#include "lungseg/core/tensor.hpp"
#include "lungseg/io/config.hpp"

namespace lungseg::model {

enum class EncoderKind { kRes2NetLike, kLightweightToy };

/// Architecture switches. The three enables correspond to the ablation grid:
/// with the decoder (PPD) off, a single-filter head over the deepest feature
/// substitutes for the global map; with refinement (RA) off, the global map
/// is the final prediction.
struct ModelConfig {
  bool enable_ea = true;
  bool enable_ppd = true;
  bool enable_ra = true;
  Index ra_channels = 64;
  EncoderKind encoder = EncoderKind::kRes2NetLike;
  bool pretrained = false;
  std::string pretrained_weights;  // checkpoint path consulted when pretrained
  Index input_h = 352;
  Index input_w = 352;
  std::vector<Index> toy_channels = {16, 24, 32, 48, 64};
  Index toy_stage_convs = 2;
  std::vector<Index> res2net_channels = {64, 128, 256, 512, 1024};

  void validate() const {
    if (ra_channels <= 0) throw ContractError("ra_channels must be positive");
    if (input_h % 32 != 0 || input_w % 32 != 0)
      throw ContractError("input size must be divisible by 32");
    if (toy_channels.size() != 5 || res2net_channels.size() != 5)
      throw ContractError("encoders need exactly five stage channel counts");
    if (toy_stage_convs < 1 || toy_stage_convs > 3)
      throw ContractError("toy_stage_convs must be 1..3");
    for (Index c : res2net_channels)
      if (c % 4 != 0) throw ContractError("res2net-like stage channels must be divisible by 4");
  }

  static ModelConfig from_config(const io::Config& cfg) {
    ModelConfig mc;
    mc.enable_ea = cfg.get_bool("enable_ea", mc.enable_ea);
    mc.enable_ppd = cfg.get_bool("enable_ppd", mc.enable_ppd);
    mc.enable_ra = cfg.get_bool("enable_ra", mc.enable_ra);
    mc.ra_channels = cfg.get_int("ra_channels", mc.ra_channels);
    const std::string enc = cfg.get_str("encoder", "res2net-like");
    if (enc == "res2net-like" || enc == "res2net")
      mc.encoder = EncoderKind::kRes2NetLike;
    else if (enc == "lightweight-toy" || enc == "toy")
      mc.encoder = EncoderKind::kLightweightToy;
    else
      throw ValidationError("unknown encoder '" + enc +
                            "' (expected res2net-like or lightweight-toy)");
    mc.pretrained = cfg.get_bool("pretrained", mc.pretrained);
    mc.pretrained_weights = cfg.get_str("pretrained_weights", mc.pretrained_weights);
    mc.input_h = cfg.get_int("input_h", mc.input_h);
    mc.input_w = cfg.get_int("input_w", mc.input_w);
    auto as_indices = [](const std::vector<double>& v) {
      std::vector<Index> out;
      for (double d : v) out.push_back(static_cast<Index>(d));
      return out;
    };
    mc.toy_channels = as_indices(
        cfg.get_list("toy_channels", {16, 24, 32, 48, 64}));
    mc.toy_stage_convs = cfg.get_int("toy_stage_convs", mc.toy_stage_convs);
    mc.res2net_channels = as_indices(
        cfg.get_list("encoder_channels", {64, 128, 256, 512, 1024}));
    mc.validate();
    return mc;
  }

  void store(io::Config& cfg) const {
    auto join = [](const std::vector<Index>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    };
    cfg.set("enable_ea", enable_ea ? "true" : "false");
    cfg.set("enable_ppd", enable_ppd ? "true" : "false");
    cfg.set("enable_ra", enable_ra ? "true" : "false");
    cfg.set("ra_channels", std::to_string(ra_channels));
    cfg.set("encoder",
            encoder == EncoderKind::kRes2NetLike ? "res2net-like" : "lightweight-toy");
    cfg.set("pretrained", pretrained ? "true" : "false");
    if (!pretrained_weights.empty()) cfg.set("pretrained_weights", pretrained_weights);
    cfg.set("input_h", std::to_string(input_h));
    cfg.set("input_w", std::to_string(input_w));
    cfg.set("toy_channels", join(toy_channels));
    cfg.set("toy_stage_convs", std::to_string(toy_stage_convs));
    cfg.set("encoder_channels", join(res2net_channels));
  }
};

}  // namespace lungseg::model
