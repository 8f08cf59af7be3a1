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

#include "lungseg/data/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "lungseg/core/error.hpp"
#include "lungseg/core/interp.hpp"

namespace fs = std::filesystem;

namespace lungseg::data {

CTSlice make_slice(Plane raw, std::string id, Source source) {
  if (!raw.isFinite().all()) throw ValidationError("slice '" + id + "' has non-finite pixels");
  if (raw.rows() < 64 || raw.cols() < 64)
    throw ValidationError("slice '" + id + "' is smaller than 64x64");
  const float lo = raw.minCoeff();
  const float hi = raw.maxCoeff();
  if (hi > lo)
    raw = (raw - lo) / (hi - lo);
  else
    raw.setZero();
  return CTSlice{std::move(raw), std::move(id), source};
}

BinaryMask make_mask(const io::ByteImage& raw, std::string id) {
  Plane values(raw.rows(), raw.cols());
  for (Index y = 0; y < raw.rows(); ++y) {
    for (Index x = 0; x < raw.cols(); ++x) {
      if (raw(y, x) == 0)
        values(y, x) = 0.0f;
      else if (raw(y, x) == 255)
        values(y, x) = 1.0f;
      else
        throw ValidationError("mask '" + id + "' has non-binary value " +
                              std::to_string(int(raw(y, x))) + " (expected 0 or 255)");
    }
  }
  return BinaryMask{std::move(values), std::move(id)};
}

MultiClassMask make_multiclass_mask(const io::ByteImage& raw, std::string id) {
  for (Index y = 0; y < raw.rows(); ++y)
    for (Index x = 0; x < raw.cols(); ++x)
      if (raw(y, x) > 2)
        throw ValidationError("multi-class mask '" + id + "' has label " +
                              std::to_string(int(raw(y, x))) + " outside {0,1,2}");
  return MultiClassMask{raw, std::move(id)};
}

BinaryMask derive_edge_map(const BinaryMask& mask) {
  const Plane& m = mask.values;
  const Index h = m.rows(), w = m.cols();
  Plane edge(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      // 3x3 dilation and erosion with zero padding outside the image.
      float mx = 0.0f, mn = 1.0f;
      for (Index dy = -1; dy <= 1; ++dy) {
        for (Index dx = -1; dx <= 1; ++dx) {
          const Index yy = y + dy, xx = x + dx;
          const float v = (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0.0f : m(yy, xx);
          mx = std::max(mx, v);
          mn = std::min(mn, v);
        }
      }
      edge(y, x) = (mx != mn) ? 1.0f : 0.0f;
    }
  }
  return BinaryMask{std::move(edge), mask.id};
}

Plane resize_bilinear_plane(const Plane& src, Index out_h, Index out_w) {
  if (out_h <= 0 || out_w <= 0) throw ContractError("resize: target size must be positive");
  if (src.rows() == out_h && src.cols() == out_w) return src;
  const LinearAxisMap ym = make_linear_axis_map(src.rows(), out_h);
  const LinearAxisMap xm = make_linear_axis_map(src.cols(), out_w);
  Plane dst(out_h, out_w);
  for (Index oy = 0; oy < out_h; ++oy) {
    const float ty = static_cast<float>(ym.t[oy]);
    for (Index ox = 0; ox < out_w; ++ox) {
      const float tx = static_cast<float>(xm.t[ox]);
      const float top =
          (1.0f - tx) * src(ym.lo[oy], xm.lo[ox]) + tx * src(ym.lo[oy], xm.hi[ox]);
      const float bot =
          (1.0f - tx) * src(ym.hi[oy], xm.lo[ox]) + tx * src(ym.hi[oy], xm.hi[ox]);
      dst(oy, ox) = (1.0f - ty) * top + ty * bot;
    }
  }
  return dst;
}

Plane resize_nearest_plane(const Plane& src, Index out_h, Index out_w) {
  if (out_h <= 0 || out_w <= 0) throw ContractError("resize: target size must be positive");
  if (src.rows() == out_h && src.cols() == out_w) return src;
  const auto ym = make_nearest_axis_map(src.rows(), out_h);
  const auto xm = make_nearest_axis_map(src.cols(), out_w);
  Plane dst(out_h, out_w);
  for (Index oy = 0; oy < out_h; ++oy)
    for (Index ox = 0; ox < out_w; ++ox) dst(oy, ox) = src(ym[oy], xm[ox]);
  return dst;
}

std::pair<CTSlice, BinaryMask> resize_pair(const CTSlice& slice, const BinaryMask& mask,
                                           Index out_h, Index out_w) {
  if (slice.pixels.rows() != mask.values.rows() || slice.pixels.cols() != mask.values.cols())
    throw ContractError("resize_pair: slice/mask dims differ for '" + slice.id + "'");
  CTSlice out_slice{resize_bilinear_plane(slice.pixels, out_h, out_w), slice.id, slice.source};
  Plane m = resize_nearest_plane(mask.values, out_h, out_w);
  m = (m >= 0.5f).cast<float>();  // nearest keeps {0,1}; re-binarize regardless
  return {std::move(out_slice), BinaryMask{std::move(m), mask.id}};
}

namespace {

std::vector<fs::path> list_images(const fs::path& dir, bool jpeg_ok) {
  std::vector<fs::path> files;
  if (!fs::exists(dir)) return files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || (jpeg_ok && (ext == ".jpg" || ext == ".jpeg")))
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

DatasetSplit load_dataset(const std::string& root, const SplitSpec& spec) {
  const fs::path rootp(root);
  const fs::path images_dir = rootp / "images";
  const fs::path masks_dir = rootp / "masks";
  if (!fs::exists(images_dir)) throw IoError("dataset root has no images/ directory: " + root);
  if (!fs::exists(masks_dir)) throw IoError("dataset root has no masks/ directory: " + root);

  std::vector<LabeledPair> labeled;
  std::set<std::string> labeled_ids;
  for (const auto& path : list_images(images_dir, /*jpeg_ok=*/true)) {
    const std::string id = path.stem().string();
    const fs::path mask_path = masks_dir / (id + ".png");
    if (!fs::exists(mask_path))
      throw IoError("missing mask for labeled image '" + id + "' (expected " +
                    mask_path.string() + ")");
    CTSlice slice = make_slice(io::load_gray(path.string()), id, Source::kLabeled);
    BinaryMask mask = make_mask(io::load_u8(mask_path.string()), id);
    if (mask.values.rows() != slice.pixels.rows() || mask.values.cols() != slice.pixels.cols())
      throw ValidationError("mask dims differ from image dims for '" + id + "'");
    labeled.push_back({std::move(slice), std::move(mask)});
    labeled_ids.insert(id);
  }

  const long n = static_cast<long>(labeled.size());
  const long n_test = spec.test < 0 ? n - spec.train - spec.val : spec.test;
  if (spec.train < 0 || spec.val < 0 || n_test < 0 || spec.train + spec.val + n_test != n)
    throw ValidationError("split sizes " + std::to_string(spec.train) + "/" +
                          std::to_string(spec.val) + "/" + std::to_string(n_test) +
                          " do not partition " + std::to_string(n) + " labeled images");

  std::vector<std::size_t> order(labeled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);

  DatasetSplit split;
  for (long i = 0; i < n; ++i) {
    LabeledPair& pair = labeled[order[i]];
    if (i < spec.train)
      split.train_labeled.push_back(std::move(pair));
    else if (i < spec.train + spec.val)
      split.val.push_back(std::move(pair));
    else
      split.test.push_back(std::move(pair));
  }

  for (const auto& path : list_images(rootp / "unlabeled", /*jpeg_ok=*/true)) {
    const std::string id = path.stem().string();
    if (labeled_ids.count(id))
      throw ValidationError("unlabeled id '" + id + "' collides with a labeled image");
    split.unlabeled.push_back(make_slice(io::load_gray(path.string()), id, Source::kUnlabeled));
  }

  for (const auto& path : list_images(rootp / "multiclass_masks", /*jpeg_ok=*/false)) {
    const std::string id = path.stem().string();
    split.multiclass.emplace(id, make_multiclass_mask(io::load_u8(path.string()), id));
  }
  return split;
}

void write_manifest(const DatasetSplit& split, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write manifest: " + path);
  for (const auto& p : split.train_labeled) os << p.slice.id << "\ttrain\n";
  for (const auto& p : split.val) os << p.slice.id << "\tval\n";
  for (const auto& p : split.test) os << p.slice.id << "\ttest\n";
  for (const auto& s : split.unlabeled) os << s.id << "\tunlabeled\n";
  if (!os) throw IoError("manifest write failed: " + path);
}

Index round_to_stride32(double x) {
  const long long k = std::llround(x / 32.0);
  return static_cast<Index>(32 * std::max<long long>(1, k));
}

MultiscaleBatcher::MultiscaleBatcher(const std::vector<LabeledPair>* pairs,
                                     BatcherOptions options, std::uint64_t seed)
    : pairs_(pairs), options_(std::move(options)), seed_(seed) {
  if (options_.ratios.empty()) throw ContractError("multiscale batching needs at least one ratio");
  for (double r : options_.ratios)
    if (!(r > 0.0)) throw ContractError("scaling ratio must be positive");
  if (options_.batch_size <= 0) throw ContractError("batch size must be positive");
  start_epoch(0);
}

void MultiscaleBatcher::start_epoch(std::uint64_t epoch) {
  order_.resize(pairs_->size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng = Rng::child(seed_, epoch);
  rng.shuffle(order_);
  const std::size_t n_batches =
      (order_.size() + options_.batch_size - 1) / options_.batch_size;
  batch_ratio_.resize(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b)
    batch_ratio_[b] = options_.ratios[rng.uniform_index(options_.ratios.size())];
  cursor_ = 0;
  batch_index_ = 0;
}

Index MultiscaleBatcher::batches_per_epoch() const {
  return static_cast<Index>((order_.size() + options_.batch_size - 1) / options_.batch_size);
}

std::optional<Batch> MultiscaleBatcher::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t count =
      std::min<std::size_t>(options_.batch_size, order_.size() - cursor_);
  const double ratio = batch_ratio_[batch_index_];
  const Index th = round_to_stride32(static_cast<double>(options_.base_h) * ratio);
  const Index tw = round_to_stride32(static_cast<double>(options_.base_w) * ratio);

  Batch batch;
  batch.images = Tensor<float>::zeros(static_cast<Index>(count), 1, th, tw);
  batch.masks = Tensor<float>::zeros(static_cast<Index>(count), 1, th, tw);
  for (std::size_t i = 0; i < count; ++i) {
    const LabeledPair& pair = (*pairs_)[order_[cursor_ + i]];
    auto [slice, mask] = resize_pair(pair.slice, pair.mask, th, tw);
    batch.images.plane(static_cast<Index>(i), 0) = slice.pixels;
    batch.masks.plane(static_cast<Index>(i), 0) = mask.values;
    batch.ids.push_back(pair.slice.id);
  }
  cursor_ += count;
  ++batch_index_;
  return batch;
}

}  // namespace lungseg::data
