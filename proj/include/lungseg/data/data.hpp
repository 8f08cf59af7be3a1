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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lungseg/core/rng.hpp"
#include "lungseg/core/tensor.hpp"
#include "lungseg/io/image_io.hpp"

namespace lungseg::data {

/// H x W float plane; images hold [0,1], masks hold strictly {0,1}.
using Plane = Eigen::ArrayXXf;

enum class Source { kLabeled, kUnlabeled };

struct CTSlice {
  Plane pixels;
  std::string id;
  Source source = Source::kLabeled;
};

struct BinaryMask {
  Plane values;
  std::string id;
};

struct MultiClassMask {
  io::ByteImage values;  // 0 background, 1 GGO, 2 consolidation
  std::string id;
};

struct LabeledPair {
  CTSlice slice;
  BinaryMask mask;
};

struct DatasetSplit {
  std::vector<LabeledPair> train_labeled;
  std::vector<LabeledPair> val;
  std::vector<LabeledPair> test;
  std::vector<CTSlice> unlabeled;
  std::map<std::string, MultiClassMask> multiclass;  // keyed by id when present
};

struct SplitSpec {
  long train = 45;
  long val = 5;
  long test = 50;  // -1 takes the remainder
  std::uint64_t seed = 0;
};

/// Min/max-normalizes a raw plane into a validated CTSlice (finite values,
/// dims at least 64x64).
CTSlice make_slice(Plane raw, std::string id, Source source);

/// Validates a raw 8-bit mask plane ({0,255}) into a {0,1} BinaryMask.
BinaryMask make_mask(const io::ByteImage& raw, std::string id);

MultiClassMask make_multiclass_mask(const io::ByteImage& raw, std::string id);

/// Edge ground truth: 3x3 morphological gradient (dilation minus erosion,
/// zero padded) of a binary mask, nonzero -> 1.
BinaryMask derive_edge_map(const BinaryMask& mask);

Plane resize_bilinear_plane(const Plane& src, Index out_h, Index out_w);
Plane resize_nearest_plane(const Plane& src, Index out_h, Index out_w);

/// Image resampled bilinearly, mask nearest-neighbor then re-binarized.
std::pair<CTSlice, BinaryMask> resize_pair(const CTSlice& slice, const BinaryMask& mask,
                                           Index out_h, Index out_w);

/// Loads root/{images,masks[,unlabeled][,multiclass_masks]} and partitions
/// the labeled pairs with a seeded shuffle. Same root and seed always yield
/// identical partitions.
DatasetSplit load_dataset(const std::string& root, const SplitSpec& spec);

void write_manifest(const DatasetSplit& split, const std::string& path);

/// Nearest multiple of 32, at least 32, so five stride-2 stages divide evenly.
Index round_to_stride32(double x);

struct Batch {
  Tensor<float> images;  // (N,1,H,W)
  Tensor<float> masks;   // (N,1,H,W)
  std::vector<std::string> ids;
};

struct BatcherOptions {
  std::vector<double> ratios = {0.75, 1.0, 1.25};
  Index base_h = 352;
  Index base_w = 352;
  Index batch_size = 16;
};

/// Streams one epoch at a time: pairs are shuffled per epoch, grouped into
/// batches, and every batch draws one scaling ratio; spatial dims are rounded
/// to multiples of 32. Holds a non-owning view of the pair list.
class MultiscaleBatcher {
 public:
  MultiscaleBatcher(const std::vector<LabeledPair>* pairs, BatcherOptions options,
                    std::uint64_t seed);

  /// Resets the stream for the given epoch index (deterministic in
  /// (seed, epoch)).
  void start_epoch(std::uint64_t epoch);

  std::optional<Batch> next();

  Index batches_per_epoch() const;

 private:
  const std::vector<LabeledPair>* pairs_;
  BatcherOptions options_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::vector<double> batch_ratio_;
  std::size_t cursor_ = 0;
  std::size_t batch_index_ = 0;
};

}  // namespace lungseg::data
