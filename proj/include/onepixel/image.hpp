#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "onepixel/errors.hpp"

namespace onepixel {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// 8-bit RGB raster, row-major, origin top-left: x is the column, y the row.
// Treated as an immutable value once built; every operation below returns a
// new image, so a base image can be shared across concurrent attack workers.
class RgbImage {
 public:
  RgbImage(int width, int height, Rgb fill = {})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0)
      throw ConfigError("image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  RgbImage(int width, int height, std::vector<Rgb> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0)
      throw ConfigError("image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height)
      throw ConfigError("pixel count does not match image dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<Rgb>& pixels() const { return pixels_; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  const Rgb& at(int x, int y) const {
    check_bounds(x, y);
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }

  void set(int x, int y, Rgb c) {
    check_bounds(x, y);
    pixels_[static_cast<std::size_t>(y) * width_ + x] = c;
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  void check_bounds(int x, int y) const {
    if (!in_bounds(x, y))
      throw std::out_of_range("pixel (" + std::to_string(x) + ", " +
                              std::to_string(y) + ") outside " +
                              std::to_string(width_) + "x" +
                              std::to_string(height_) + " image");
  }

  int width_;
  int height_;
  std::vector<Rgb> pixels_;
};

// The 5-dimensional attack vector: pixel position plus replacement color.
struct PixelPerturbation {
  int x = 0;
  int y = 0;
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  Rgb color() const { return {r, g, b}; }

  friend bool operator==(const PixelPerturbation&, const PixelPerturbation&) = default;
};

// Returns a copy of the image with pixel (x, y) set to the perturbation
// color. The input is untouched. Out-of-bounds coordinates throw.
inline RgbImage apply_perturbation(const RgbImage& image, const PixelPerturbation& p) {
  RgbImage out = image;
  out.set(p.x, p.y, p.color());
  return out;
}

// Number of pixel positions at which two equally sized images differ.
inline std::size_t pixel_diff_count(const RgbImage& a, const RgbImage& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw ConfigError("pixel_diff_count requires equal image dimensions");
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i)
    if (a.pixels()[i] != b.pixels()[i]) ++n;
  return n;
}

}  // namespace onepixel
