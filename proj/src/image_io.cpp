// Copyright 2026 The rvos Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include <jpeglib.h>
#include <png.h>

#include "rvos/image.hpp"

namespace rvos::img {

BinMask mask_for_label(const LabelMask& m, int label) {
  BinMask out(m.width, m.height);
  for (size_t i = 0; i < m.labels.size(); ++i) out.fg[i] = m.labels[i] == label ? 1 : 0;
  return out;
}

GrayMap to_gray(const BinMask& m) {
  GrayMap out(m.width, m.height);
  for (size_t i = 0; i < m.fg.size(); ++i) out.v[i] = m.fg[i] ? 1.0f : 0.0f;
  return out;
}

BinMask threshold(const GrayMap& p, float tau) {
  BinMask out(p.width, p.height);
  for (size_t i = 0; i < p.v.size(); ++i) out.fg[i] = p.v[i] >= tau ? 1 : 0;
  return out;
}

std::array<uint8_t, 3> instance_color(int id) {
  // Bit-reversal palette: each channel accumulates high bits of the index.
  std::array<uint8_t, 3> c = {0, 0, 0};
  int v = id;
  for (int shift = 7; shift >= 0 && v; shift -= 1) {
    c[0] |= static_cast<uint8_t>((v & 1) << shift);
    c[1] |= static_cast<uint8_t>(((v >> 1) & 1) << shift);
    c[2] |= static_cast<uint8_t>(((v >> 2) & 1) << shift);
    v >>= 3;
  }
  return c;
}

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

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

// Decodes the PNG into 8-bit rows. Palette images stay index-valued when
// want_indices is set; everything else expands to RGB.
void read_png_rows(const std::string& path, bool want_indices, int& width, int& height,
                   int& channels, bool& is_indexed, std::vector<uint8_t>& rows) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open PNG: " + path);
  uint8_t sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw std::runtime_error("not a PNG file: " + path);

  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw std::runtime_error("png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("PNG decode error: " + path);

  png_init_io(r.png, f.get());
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);

  width = static_cast<int>(png_get_image_width(r.png, r.info));
  height = static_cast<int>(png_get_image_height(r.png, r.info));
  const int color_type = png_get_color_type(r.png, r.info);
  const int bit_depth = png_get_bit_depth(r.png, r.info);
  if (png_get_interlace_type(r.png, r.info) != PNG_INTERLACE_NONE)
    throw std::runtime_error("interlaced PNG not supported: " + path);

  is_indexed = color_type == PNG_COLOR_TYPE_PALETTE;
  if (is_indexed && want_indices) {
    if (bit_depth < 8) png_set_packing(r.png);  // expand 1/2/4-bit indices to bytes
    channels = 1;
  } else {
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (bit_depth == 16) png_set_strip_16(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(r.png);
    png_set_strip_alpha(r.png);
    channels = 3;
  }
  png_read_update_info(r.png, r.info);
  const size_t rowbytes = png_get_rowbytes(r.png, r.info);
  if (rowbytes < static_cast<size_t>(width) * channels)
    throw std::runtime_error("unexpected PNG row size: " + path);

  rows.assign(static_cast<size_t>(height) * rowbytes, 0);
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y) row_ptrs[static_cast<size_t>(y)] = rows.data() + static_cast<size_t>(y) * rowbytes;
  png_read_image(r.png, row_ptrs.data());
  png_read_end(r.png, nullptr);

  // normalize row stride to width*channels
  if (rowbytes != static_cast<size_t>(width) * channels) {
    std::vector<uint8_t> packed(static_cast<size_t>(height) * width * channels);
    for (int y = 0; y < height; ++y)
      std::memcpy(packed.data() + static_cast<size_t>(y) * width * channels,
                  rows.data() + static_cast<size_t>(y) * rowbytes,
                  static_cast<size_t>(width) * channels);
    rows = std::move(packed);
  }
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

Frame load_jpeg(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open JPEG: " + path);

  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("JPEG decode error: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  Frame out;
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.rgb.assign(static_cast<size_t>(out.width) * out.height * 3, 0.0f);
  std::vector<uint8_t> row(static_cast<size_t>(out.width) * 3);
  JSAMPROW rowp = row.data();
  const int64_t plane = static_cast<int64_t>(out.width) * out.height;
  while (cinfo.output_scanline < cinfo.output_height) {
    const int y = static_cast<int>(cinfo.output_scanline);
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.rgb[static_cast<size_t>(c) * plane + static_cast<size_t>(y) * out.width + x] =
            row[static_cast<size_t>(x) * 3 + c] / 255.0f;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Frame load_image(const std::string& path) {
  if (ends_with(path, ".jpg") || ends_with(path, ".jpeg") || ends_with(path, ".JPG"))
    return load_jpeg(path);
  int w, h, ch;
  bool indexed;
  std::vector<uint8_t> rows;
  read_png_rows(path, /*want_indices=*/false, w, h, ch, indexed, rows);
  Frame out;
  out.width = w;
  out.height = h;
  out.rgb.assign(static_cast<size_t>(w) * h * 3, 0.0f);
  const int64_t plane = static_cast<int64_t>(w) * h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out.rgb[static_cast<size_t>(c) * plane + static_cast<size_t>(y) * w + x] =
            rows[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0f;
  return out;
}

LabelMask load_label_png(const std::string& path) {
  int w, h, ch;
  bool indexed;
  std::vector<uint8_t> rows;
  read_png_rows(path, /*want_indices=*/true, w, h, ch, indexed, rows);
  LabelMask out(w, h);
  if (indexed) {
    out.labels = std::move(rows);
  } else {
    // grayscale annotations: value is the label; RGB rows decoded above
    for (int64_t i = 0; i < static_cast<int64_t>(w) * h; ++i) {
      const uint8_t r = rows[static_cast<size_t>(i) * 3];
      const uint8_t g = rows[static_cast<size_t>(i) * 3 + 1];
      const uint8_t b = rows[static_cast<size_t>(i) * 3 + 2];
      if (r != g || g != b)
        throw std::runtime_error("annotation PNG is neither indexed nor grayscale: " + path);
      out.labels[static_cast<size_t>(i)] = r;
    }
  }
  return out;
}

void save_label_png(const LabelMask& m, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  PngWriter wtr;
  wtr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wtr.png) throw std::runtime_error("png_create_write_struct failed");
  wtr.info = png_create_info_struct(wtr.png);
  if (!wtr.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wtr.png))) throw std::runtime_error("PNG encode error: " + path);

  png_init_io(wtr.png, f.get());
  png_set_IHDR(wtr.png, wtr.info, static_cast<png_uint_32>(m.width),
               static_cast<png_uint_32>(m.height), 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_color palette[256];
  for (int i = 0; i < 256; ++i) {
    const auto c = instance_color(i);
    palette[i] = {c[0], c[1], c[2]};
  }
  png_set_PLTE(wtr.png, wtr.info, palette, 256);
  png_write_info(wtr.png, wtr.info);
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(m.height));
  for (int y = 0; y < m.height; ++y)
    row_ptrs[static_cast<size_t>(y)] =
        const_cast<png_bytep>(m.labels.data() + static_cast<size_t>(y) * m.width);
  png_write_image(wtr.png, row_ptrs.data());
  png_write_end(wtr.png, nullptr);
}

void save_rgb_png(const Frame& fr, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  PngWriter wtr;
  wtr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wtr.png) throw std::runtime_error("png_create_write_struct failed");
  wtr.info = png_create_info_struct(wtr.png);
  if (!wtr.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wtr.png))) throw std::runtime_error("PNG encode error: " + path);

  png_init_io(wtr.png, f.get());
  png_set_IHDR(wtr.png, wtr.info, static_cast<png_uint_32>(fr.width),
               static_cast<png_uint_32>(fr.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wtr.png, wtr.info);
  const int64_t plane = static_cast<int64_t>(fr.width) * fr.height;
  std::vector<uint8_t> row(static_cast<size_t>(fr.width) * 3);
  for (int y = 0; y < fr.height; ++y) {
    for (int x = 0; x < fr.width; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = fr.rgb[static_cast<size_t>(c) * plane + static_cast<size_t>(y) * fr.width + x];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        row[static_cast<size_t>(x) * 3 + c] = static_cast<uint8_t>(v * 255.0f + 0.5f);
      }
    png_write_row(wtr.png, row.data());
  }
  png_write_end(wtr.png, nullptr);
}

}  // namespace rvos::img
