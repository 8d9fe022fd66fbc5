#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pfml/error.hpp"

namespace pfml {

/// Row-major grayscale image with intensities normalized to [0, 1].
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw Error("image dimensions must be at least 1x1");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  GrayImage(int width, int height, std::vector<double> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) throw Error("image dimensions must be at least 1x1");
    if (pixels_.size() != static_cast<std::size_t>(width) * height)
      throw Error("pixel count does not match image dimensions");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  void clamp01() {
    for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

enum class BitDepth { k8 = 8, k16 = 16 };

namespace detail {

inline std::uint16_t quantize(double v, double maxval) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// The image as it reads back after a write at `depth`.
inline GrayImage quantize_image(const GrayImage& img, BitDepth depth) {
  const double maxval = depth == BitDepth::k16 ? 65535.0 : 255.0;
  GrayImage out = img;
  for (double& v : out.pixels()) v = detail::quantize(v, maxval) / maxval;
  return out;
}

// ---------------------------------------------------------------------------
// PGM (binary P5)

inline GrayImage read_pgm(const std::string& path) {
  const std::string data = detail::read_file(path);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (next_token() != "P5") throw IoError(path, "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError(path, "malformed PGM header");
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw IoError(path, "invalid PGM header values");
  ++pos;  // single whitespace byte before raster
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (data.size() < pos + n * bpp) throw IoError(path, "truncated PGM raster");
  std::vector<double> px(n);
  const auto* raw = reinterpret_cast<const unsigned char*>(data.data() + pos);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bpp == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    px[i] = std::min(1.0, static_cast<double>(v) / maxval);
  }
  return GrayImage(w, h, std::move(px));
}

inline void write_pgm(const GrayImage& img, const std::string& path, BitDepth depth = BitDepth::k8) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  const double maxval = depth == BitDepth::k16 ? 65535.0 : 255.0;
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << static_cast<int>(maxval) << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(img.size() * (depth == BitDepth::k16 ? 2 : 1));
  for (double v : img.pixels()) {
    const std::uint16_t q = detail::quantize(v, maxval);
    if (depth == BitDepth::k16) raw.push_back(static_cast<unsigned char>(q >> 8));
    raw.push_back(static_cast<unsigned char>(q & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError(path, "write failed");
}

// ---------------------------------------------------------------------------
// PNG (grayscale, 8 or 16 bit)

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

inline GrayImage read_png(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError(path, "cannot open for reading");
  std::string what;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &what, detail::png_error_fn,
                                           detail::png_warning_fn);
  if (!png) throw IoError(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  int w = 0, h = 0, bit_depth = 0;
  std::vector<std::vector<png_byte>> rows;
  std::vector<png_bytep> ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path, "PNG decode failed: " + what);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (bit_depth == 16) png_set_swap(png);  // little-endian samples
  png_read_update_info(png, info);
  bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  rows.assign(static_cast<std::size_t>(h), std::vector<png_byte>(rowbytes));
  ptrs.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) ptrs[i] = rows[i].data();
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<double> px(static_cast<std::size_t>(w) * h);
  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < h; ++y) {
    const png_byte* row = rows[static_cast<std::size_t>(y)].data();
    for (int x = 0; x < w; ++x) {
      unsigned v = bit_depth == 16 ? (row[2 * x] | (row[2 * x + 1] << 8)) : row[x];
      px[static_cast<std::size_t>(y) * w + x] = v / maxval;
    }
  }
  return GrayImage(w, h, std::move(px));
}

namespace detail {

// Kept free of non-trivial locals so that nothing is live across setjmp.
inline bool encode_png(std::FILE* fp, const png_byte* raster, int w, int h, int bits, std::size_t stride,
                       std::string* what) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, what, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bits, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, raster + static_cast<std::size_t>(y) * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline void write_png(const GrayImage& img, const std::string& path, BitDepth depth = BitDepth::k8) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError(path, "cannot open for writing");
  const double maxval = depth == BitDepth::k16 ? 65535.0 : 255.0;
  const std::size_t bpp = depth == BitDepth::k16 ? 2 : 1;
  std::vector<png_byte> raster(img.size() * bpp);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const std::uint16_t q = detail::quantize(img.pixels()[i], maxval);
    if (bpp == 2) {
      raster[2 * i] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
      raster[2 * i + 1] = static_cast<png_byte>(q & 0xff);
    } else {
      raster[i] = static_cast<png_byte>(q);
    }
  }
  std::string what;
  if (!detail::encode_png(fp.get(), raster.data(), img.width(), img.height(), static_cast<int>(depth),
                          static_cast<std::size_t>(img.width()) * bpp, &what))
    throw IoError(path, "PNG encode failed: " + what);
}

/// Dispatches on the file extension (.png or .pgm).
inline GrayImage read_image(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0) return read_pgm(path);
  return read_png(path);
}

inline void write_image(const GrayImage& img, const std::string& path, BitDepth depth = BitDepth::k8) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0) return write_pgm(img, path, depth);
  write_png(img, path, depth);
}

}  // namespace pfml
