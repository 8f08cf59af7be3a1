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

#include "lungseg/io/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "lungseg/core/error.hpp"

namespace lungseg::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path);
  return f;
}

bool is_png(std::FILE* f) {
  unsigned char sig[8];
  const std::size_t n = std::fread(sig, 1, 8, f);
  std::rewind(f);
  return n == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

bool is_jpeg(std::FILE* f) {
  unsigned char sig[2];
  const std::size_t n = std::fread(sig, 1, 2, f);
  std::rewind(f);
  return n == 2 && sig[0] == 0xFF && sig[1] == 0xD8;
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

/// Decodes rows after the configured transforms; returns channel count.
std::vector<std::vector<png_byte>> read_png_rows(std::FILE* f, const std::string& path,
                                                 bool to_gray, int* channels, Eigen::Index* h,
                                                 Eigen::Index* w) {
  std::vector<std::vector<png_byte>> rows;
  std::vector<png_bytep> row_ptrs;
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw IoError("libpng init failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("libpng init failed");
  // Locals live across the longjmp are declared before setjmp; the exception
  // thrown afterwards unwinds them normally.
  if (setjmp(png_jmpbuf(r.png))) throw IoError("corrupt PNG: " + path);

  png_init_io(r.png, f);
  png_read_info(r.png, r.info);
  const png_byte color_type = png_get_color_type(r.png, r.info);
  const png_byte bit_depth = png_get_bit_depth(r.png, r.info);

  if (to_gray) {
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (bit_depth == 16) png_set_strip_16(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_alpha(r.png);
    if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
        color_type == PNG_COLOR_TYPE_PALETTE)
      png_set_rgb_to_gray_fixed(r.png, 1 /*silent*/, -1, -1);
  } else {
    if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE)
      throw ValidationError("expected a single-channel PNG: " + path);
    if (bit_depth == 16) png_set_strip_16(r.png);
    if (bit_depth < 8) png_set_packing(r.png);  // one byte per index/level
  }
  png_read_update_info(r.png, r.info);

  *h = static_cast<Eigen::Index>(png_get_image_height(r.png, r.info));
  *w = static_cast<Eigen::Index>(png_get_image_width(r.png, r.info));
  *channels = png_get_channels(r.png, r.info);
  const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);

  rows.assign(*h, std::vector<png_byte>(rowbytes));
  row_ptrs.resize(*h);
  for (Eigen::Index y = 0; y < *h; ++y) row_ptrs[y] = rows[y].data();
  png_read_image(r.png, row_ptrs.data());
  png_read_end(r.png, nullptr);
  return rows;
}

struct JpegError {
  jpeg_error_mgr pub;
  jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  longjmp(reinterpret_cast<JpegError*>(cinfo->err)->jump, 1);
}

GrayImage load_gray_jpeg(std::FILE* f, const std::string& path) {
  GrayImage img;
  std::vector<JSAMPLE> row;
  jpeg_decompress_struct cinfo;
  JpegError jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  jpeg_create_decompress(&cinfo);
  struct Guard {
    jpeg_decompress_struct* c;
    ~Guard() { jpeg_destroy_decompress(c); }
  } guard{&cinfo};

  if (setjmp(jerr.jump)) throw IoError("corrupt JPEG: " + path);

  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_GRAYSCALE;
  jpeg_start_decompress(&cinfo);
  const Eigen::Index h = cinfo.output_height, w = cinfo.output_width;
  img.resize(h, w);
  row.resize(w);
  JSAMPROW rowp = row.data();
  while (cinfo.output_scanline < cinfo.output_height) {
    const Eigen::Index y = cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    for (Eigen::Index x = 0; x < w; ++x) img(y, x) = static_cast<float>(row[x]) / 255.0f;
  }
  jpeg_finish_decompress(&cinfo);
  return img;
}

}  // namespace

GrayImage load_gray(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  if (is_jpeg(f.get())) return load_gray_jpeg(f.get(), path);
  if (!is_png(f.get())) throw IoError("unsupported image format: " + path);
  int channels = 0;
  Eigen::Index h = 0, w = 0;
  auto rows = read_png_rows(f.get(), path, /*to_gray=*/true, &channels, &h, &w);
  if (channels != 1) throw IoError("grayscale conversion failed for " + path);
  GrayImage img(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) img(y, x) = static_cast<float>(rows[y][x]) / 255.0f;
  return img;
}

ByteImage load_u8(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  if (!is_png(f.get())) throw IoError("expected a PNG file: " + path);
  int channels = 0;
  Eigen::Index h = 0, w = 0;
  auto rows = read_png_rows(f.get(), path, /*to_gray=*/false, &channels, &h, &w);
  if (channels != 1) throw ValidationError("expected a single-channel PNG: " + path);
  ByteImage img(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) img(y, x) = rows[y][x];
  return img;
}

namespace {

void write_png(const std::string& path, const std::vector<std::vector<png_byte>>& rows,
               Eigen::Index w, int color_type,
               const std::vector<std::array<std::uint8_t, 3>>* palette) {
  std::vector<png_color> plte;
  if (palette)
    for (const auto& c : *palette) plte.push_back(png_color{c[0], c[1], c[2]});
  FilePtr f = open_file(path, "wb");
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) throw IoError("libpng init failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(wr.png))) throw IoError("PNG write failed: " + path);

  png_init_io(wr.png, f.get());
  png_set_compression_level(wr.png, 6);  // pinned for byte-stable output
  png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(rows.size()), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (!plte.empty()) png_set_PLTE(wr.png, wr.info, plte.data(), static_cast<int>(plte.size()));
  png_write_info(wr.png, wr.info);
  for (const auto& row : rows)
    png_write_row(wr.png, const_cast<png_bytep>(row.data()));
  png_write_end(wr.png, nullptr);
}

}  // namespace

void save_gray_png(const std::string& path, const GrayImage& img) {
  std::vector<std::vector<png_byte>> rows(img.rows(), std::vector<png_byte>(img.cols()));
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      const float v = std::min(std::max(img(y, x), 0.0f), 1.0f);
      rows[y][x] = static_cast<png_byte>(std::lround(v * 255.0f));
    }
  write_png(path, rows, img.cols(), PNG_COLOR_TYPE_GRAY, nullptr);
}

void save_indexed_png(const std::string& path, const ByteImage& img,
                      const std::vector<std::array<std::uint8_t, 3>>& palette) {
  std::vector<std::vector<png_byte>> rows(img.rows(), std::vector<png_byte>(img.cols()));
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x) rows[y][x] = img(y, x);
  write_png(path, rows, img.cols(), PNG_COLOR_TYPE_PALETTE, &palette);
}

void save_rgb_png(const std::string& path, const ByteImage& r, const ByteImage& g,
                  const ByteImage& b) {
  if (r.rows() != g.rows() || r.rows() != b.rows() || r.cols() != g.cols() ||
      r.cols() != b.cols())
    throw ContractError("save_rgb_png: plane size mismatch");
  std::vector<std::vector<png_byte>> rows(r.rows(), std::vector<png_byte>(r.cols() * 3));
  for (Eigen::Index y = 0; y < r.rows(); ++y)
    for (Eigen::Index x = 0; x < r.cols(); ++x) {
      rows[y][3 * x + 0] = r(y, x);
      rows[y][3 * x + 1] = g(y, x);
      rows[y][3 * x + 2] = b(y, x);
    }
  write_png(path, rows, r.cols(), PNG_COLOR_TYPE_RGB, nullptr);
}

}  // namespace lungseg::io
