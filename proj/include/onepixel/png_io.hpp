#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "onepixel/errors.hpp"
#include "onepixel/image.hpp"

namespace onepixel {

namespace detail {

struct PngReadState {
  const std::uint8_t* data = nullptr;
  std::size_t size = 0;
  std::size_t offset = 0;
  std::string error;
};

struct PngWriteState {
  std::vector<std::uint8_t>* out = nullptr;
  std::string error;
};

inline void png_read_fn(png_structp png, png_bytep dest, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->offset + n > st->size) {
    png_error(png, "unexpected end of PNG stream");
    return;  // not reached
  }
  std::memcpy(dest, st->data + st->offset, n);
  st->offset += n;
}

inline void png_write_fn(png_structp png, png_bytep src, png_size_t n) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), src, src + n);
}

inline void png_flush_fn(png_structp) {}

inline void png_store_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err && err->empty()) *err = msg;
  std::longjmp(png_jmpbuf(png), 1);
}

inline void png_ignore_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

// Decodes an 8-bit PNG of any color type into an RgbImage. Alpha channels
// are dropped, grayscale and palette images expand to RGB, 16-bit channels
// are truncated to 8. Malformed input throws DecodeError carrying the byte
// offset reached in the stream.
inline RgbImage decode_png(const std::uint8_t* data, std::size_t size) {
  detail::PngReadState state{data, size, 0, {}};
  std::string error;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error,
                                           detail::png_store_error_fn,
                                           detail::png_ignore_warning_fn);
  if (!png) throw DecodeError("png_create_read_struct failed", 0);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("png_create_info_struct failed", 0);
  }

  // Row storage lives outside the setjmp region so nothing leaks on longjmp.
  std::vector<std::uint8_t> raster;
  std::vector<png_bytep> row_ptrs;
  png_uint_32 width = 0, height = 0;

  if (setjmp(png_jmpbuf(png))) {
    const std::size_t offset = state.offset;
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError(error.empty() ? "malformed PNG" : error, offset);
  }

  png_set_read_fn(png, &state, detail::png_read_fn);
  png_read_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  if (png_get_channels(png, info) != 3)
    png_error(png, "unsupported channel layout after RGB normalization");

  raster.resize(static_cast<std::size_t>(width) * height * 3);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y)
    row_ptrs[y] = raster.data() + static_cast<std::size_t>(y) * width * 3;

  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<Rgb> pixels(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = {raster[i * 3], raster[i * 3 + 1], raster[i * 3 + 2]};
  return RgbImage(static_cast<int>(width), static_cast<int>(height),
                  std::move(pixels));
}

inline RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  return decode_png(bytes.data(), bytes.size());
}

inline RgbImage decode_png(const std::string& bytes) {
  return decode_png(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                    bytes.size());
}

// Encodes an RgbImage as an 8-bit RGB PNG. Encoder settings are fixed
// (zlib level 6, no scanline filtering), so the same image always produces
// byte-identical output.
inline std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  std::vector<std::uint8_t> out;
  std::string error;
  detail::PngWriteState state{&out, {}};

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error,
                                            detail::png_store_error_fn,
                                            detail::png_ignore_warning_fn);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }

  std::vector<std::uint8_t> raster;
  std::vector<png_bytep> row_ptrs;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(error.empty() ? "PNG encode failed" : error);
  }

  png_set_write_fn(png, &state, detail::png_write_fn, detail::png_flush_fn);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t w = static_cast<std::size_t>(image.width());
  raster.resize(w * image.height() * 3);
  for (std::size_t i = 0; i < image.pixels().size(); ++i) {
    raster[i * 3] = image.pixels()[i].r;
    raster[i * 3 + 1] = image.pixels()[i].g;
    raster[i * 3 + 2] = image.pixels()[i].b;
  }
  row_ptrs.resize(image.height());
  for (int y = 0; y < image.height(); ++y)
    row_ptrs[y] = raster.data() + static_cast<std::size_t>(y) * w * 3;

  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline std::string encode_png_string(const RgbImage& image) {
  const std::vector<std::uint8_t> bytes = encode_png(image);
  return std::string(bytes.begin(), bytes.end());
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  if (in.bad()) throw Error("failed to read file: " + path);
  return bytes;
}

inline RgbImage decode_png_file(const std::string& path) {
  return decode_png(read_file_bytes(path));
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed to write file: " + path);
}

inline void encode_png_file(const RgbImage& image, const std::string& path) {
  write_file_bytes(path, encode_png(image));
}

}  // namespace onepixel
