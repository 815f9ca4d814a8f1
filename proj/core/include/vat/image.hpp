// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vat {

using Sample = std::uint8_t;

/// Decoded 8-bit raster, row-major, interleaved channels (1 = gray, 3 = sRGB).
///
/// The constructor enforces `pixels.size() == width * height * channels`, so a
/// RasterImage that exists is always well formed.
class RasterImage {
 public:
  RasterImage(int width, int height, int channels, std::vector<Sample> pixels);
  RasterImage(int width, int height, int channels, Sample fill);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t sample_count() const noexcept { return pixels_.size(); }

  std::span<const Sample> pixels() const noexcept { return pixels_; }
  std::span<Sample> mutable_pixels() noexcept { return pixels_; }

  Sample at(int x, int y, int c = 0) const noexcept {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  Sample& at(int x, int y, int c = 0) noexcept {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  bool same_shape(const RasterImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<Sample> pixels_;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  long long area() const noexcept { return static_cast<long long>(width()) * height(); }

  bool valid_in(int image_width, int image_height) const noexcept {
    return 0 <= x0 && x0 < x1 && x1 <= image_width && 0 <= y0 && y0 < y1 && y1 <= image_height;
  }
  bool valid_in(const RasterImage& img) const noexcept { return valid_in(img.width(), img.height()); }

  bool contains(int x, int y) const noexcept { return x0 <= x && x < x1 && y0 <= y && y < y1; }

  /// Area of the intersection; 0 when the rectangles only touch or are disjoint.
  long long overlap_area(const BoundingBox& other) const noexcept;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Decodes a PNG or baseline JPEG stream. Alpha is composited over white.
/// Throws DecodeError for anything else.
RasterImage decode_image(std::span<const std::uint8_t> bytes);
RasterImage decode_image(std::string_view bytes);

/// Lossless PNG encoding; the output decodes back to an identical image.
std::string encode_png(const RasterImage& img);

/// BT.601 luma with round-half-up; gray input is returned unchanged.
RasterImage to_grayscale(const RasterImage& img);

/// Same shape as `img`, every sample set to `value`.
RasterImage blank_like(const RasterImage& img, Sample value = 255);

/// Replicates a gray image into `channels` channels (1 or 3). RGB inputs must
/// already have the requested channel count.
RasterImage expand_channels(const RasterImage& img, int channels);

RasterImage load_image(const std::filesystem::path& path);
void save_png(const RasterImage& img, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace vat
