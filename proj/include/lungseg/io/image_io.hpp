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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace lungseg::io {

/// H x W grayscale plane in [0,1].
using GrayImage = Eigen::ArrayXXf;
/// H x W raw 8-bit plane (gray levels, palette indices, class labels).
using ByteImage = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Decodes a PNG or JPEG (sniffed by magic) to grayscale [0,1]; color inputs
/// are converted, 16-bit PNGs reduced to 8-bit.
GrayImage load_gray(const std::string& path);

/// Decodes a single-channel PNG without value mapping: gray levels stay gray
/// levels and palette indices stay indices. Rejects color images.
ByteImage load_u8(const std::string& path);

/// 8-bit grayscale PNG; values round(clamp(v,0,1) * 255).
void save_gray_png(const std::string& path, const GrayImage& img);

/// Palette PNG storing raw indices; palette entries are RGB triples.
void save_indexed_png(const std::string& path, const ByteImage& img,
                      const std::vector<std::array<std::uint8_t, 3>>& palette);

/// 8-bit RGB PNG from three planes.
void save_rgb_png(const std::string& path, const ByteImage& r, const ByteImage& g,
                  const ByteImage& b);

}  // namespace lungseg::io
