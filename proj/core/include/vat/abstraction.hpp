// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vat/image.hpp"

namespace vat {

class SketchClient;

/// Visual abstract styles. Canny and Binary are computed in-process; the
/// other four are produced by a sketcher service.
enum class AbstractStyle { Canny, Binary, PhotoSketch, Contour, Anime, OpenSketch };

std::string_view to_string(AbstractStyle style) noexcept;
/// Case-insensitive; returns nullopt for unknown names.
std::optional<AbstractStyle> parse_style(std::string_view name) noexcept;
std::span<const AbstractStyle> all_styles() noexcept;

constexpr bool is_native(AbstractStyle style) noexcept {
  return style == AbstractStyle::Canny || style == AbstractStyle::Binary;
}

enum class Polarity { DarkOnWhite, LightOnBlack };

std::string_view to_string(Polarity polarity) noexcept;
std::optional<Polarity> parse_polarity(std::string_view name) noexcept;

struct CannyParams {
  double sigma = 1.4;
  double low_ratio = 0.10;
  double high_ratio = 0.20;
  Polarity polarity = Polarity::DarkOnWhite;

  /// Throws std::invalid_argument unless 0 < sigma <= kMaxSigma and
  /// 0 < low_ratio < high_ratio <= 1.
  void validate() const;

  static constexpr double kMaxSigma = 50.0;
};

/// A style-tagged abstract image with its provenance.
struct VisualAbstract {
  RasterImage image;
  AbstractStyle style;
  std::string source_digest;  // image_digest() of the source image
  std::string params;         // JSON-serialized transform parameters
};

/// Intermediate state of the edge detector, exposed for inspection and tests.
struct CannyTrace {
  int width = 0;
  int height = 0;
  std::vector<std::int64_t> magnitude2;  // squared Sobel magnitude of the smoothed image
  std::vector<std::uint8_t> nms;         // 1 where the pixel survives non-maximum suppression
  std::vector<std::uint8_t> edges;       // 1 where the pixel is a final edge
  double low_threshold = 0.0;            // on the (non-squared) magnitude
  double high_threshold = 0.0;
};

/// Fixed-point Gaussian taps for offsets -r..r, r = ceil(3*sigma). The taps are
/// exp(-i^2 / 2 sigma^2) scaled so their sum is close to 1000 and rounded;
/// smoothing is left unnormalized, which the ratio thresholds make harmless.
std::vector<std::int64_t> gaussian_taps(double sigma);

CannyTrace canny_trace(const RasterImage& gray, const CannyParams& params);

/// Bilevel Canny edge map. Throws ImageTooSmall when min(width, height) < 3.
VisualAbstract canny(const RasterImage& gray, const CannyParams& params = {});

/// Threshold maximizing between-class variance (ties resolve to the smallest t).
/// Samples > t belong to the upper class.
Sample otsu_threshold(const RasterImage& gray);

VisualAbstract otsu_binarize(const RasterImage& gray, Polarity polarity = Polarity::DarkOnWhite);

struct AbstractionConfig {
  CannyParams canny;
  Polarity binary_polarity = Polarity::DarkOnWhite;
  std::shared_ptr<SketchClient> sketcher;  // required for neural styles
};

/// Transform an image into the requested style. Native styles operate on
/// to_grayscale(img); neural styles go through `config.sketcher`.
VisualAbstract abstract_image(const RasterImage& img, AbstractStyle style,
                              const AbstractionConfig& config = {});

/// Rule-based style choice per benchmark task category. Unknown categories
/// fall back to OpenSketch.
AbstractStyle select_style(std::string_view task_category) noexcept;

}  // namespace vat
