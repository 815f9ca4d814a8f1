// SPDX-License-Identifier: Apache-2.0

#include "vat/abstraction.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vat/digest.hpp"
#include "vat/error.hpp"
#include "vat/sketcher_client.hpp"

namespace vat {

namespace {

constexpr std::array<AbstractStyle, 6> kStyles{
    AbstractStyle::Canny,   AbstractStyle::Binary, AbstractStyle::PhotoSketch,
    AbstractStyle::Contour, AbstractStyle::Anime,  AbstractStyle::OpenSketch};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline int clamp_index(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

std::uint8_t direction_bin(std::int64_t gx, std::int64_t gy) {
  double angle = std::atan2(static_cast<double>(gy), static_cast<double>(gx)) * 180.0 /
                 std::numbers::pi;
  if (angle < 0.0) angle += 180.0;
  if (angle < 22.5 || angle >= 157.5) return 0;
  if (angle < 67.5) return 1;
  if (angle < 112.5) return 2;
  return 3;
}

// Offsets of the "after" neighbor per bin; the "before" neighbor is the negation.
constexpr std::array<std::array<int, 2>, 4> kAfter{{{1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

__extension__ typedef __int128 i128;
__extension__ typedef unsigned __int128 u128;

using U192 = std::array<std::uint64_t, 3>;  // little-endian limbs

U192 mul_u128_u64(u128 a, std::uint64_t b) {
  const auto lo = static_cast<std::uint64_t>(a);
  const auto hi = static_cast<std::uint64_t>(a >> 64);
  const u128 p0 = static_cast<u128>(lo) * b;
  const u128 p1 = static_cast<u128>(hi) * b + (p0 >> 64);
  return {static_cast<std::uint64_t>(p0), static_cast<std::uint64_t>(p1),
          static_cast<std::uint64_t>(p1 >> 64)};
}

int compare(const U192& a, const U192& b) {
  for (int i = 2; i >= 0; --i) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

VisualAbstract make_bilevel(int width, int height, const std::vector<std::uint8_t>& on,
                            Polarity polarity, AbstractStyle style, std::string source_digest,
                            std::string params) {
  const Sample fg = polarity == Polarity::DarkOnWhite ? 0 : 255;
  const Sample bg = polarity == Polarity::DarkOnWhite ? 255 : 0;
  std::vector<Sample> px(on.size());
  for (std::size_t i = 0; i < on.size(); ++i) px[i] = on[i] ? fg : bg;
  return VisualAbstract{RasterImage(width, height, 1, std::move(px)), style,
                        std::move(source_digest), std::move(params)};
}

void require_gray(const RasterImage& img, const char* op) {
  if (img.channels() != 1) {
    throw std::invalid_argument(std::string(op) + ": expected a single-channel image");
  }
}

}  // namespace

std::string_view to_string(AbstractStyle style) noexcept {
  switch (style) {
    case AbstractStyle::Canny: return "canny";
    case AbstractStyle::Binary: return "binary";
    case AbstractStyle::PhotoSketch: return "photosketch";
    case AbstractStyle::Contour: return "contour";
    case AbstractStyle::Anime: return "anime";
    case AbstractStyle::OpenSketch: return "opensketch";
  }
  return "unknown";
}

std::optional<AbstractStyle> parse_style(std::string_view name) noexcept {
  const std::string key = lower(trim(name));
  for (auto s : kStyles) {
    if (key == to_string(s)) return s;
  }
  return std::nullopt;
}

std::span<const AbstractStyle> all_styles() noexcept { return kStyles; }

std::string_view to_string(Polarity polarity) noexcept {
  return polarity == Polarity::DarkOnWhite ? "dark-on-white" : "light-on-black";
}

std::optional<Polarity> parse_polarity(std::string_view name) noexcept {
  const std::string key = lower(trim(name));
  if (key == "dark-on-white" || key == "dark") return Polarity::DarkOnWhite;
  if (key == "light-on-black" || key == "light") return Polarity::LightOnBlack;
  return std::nullopt;
}

void CannyParams::validate() const {
  if (!(sigma > 0.0) || sigma > kMaxSigma) {
    throw std::invalid_argument("canny: sigma must be in (0, 50]");
  }
  if (!(low_ratio > 0.0 && low_ratio < high_ratio && high_ratio <= 1.0)) {
    throw std::invalid_argument("canny: require 0 < low_ratio < high_ratio <= 1");
  }
}

std::vector<std::int64_t> gaussian_taps(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> raw;
  raw.reserve(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    raw.push_back(w);
    sum += w;
  }
  const double scale = 1000.0 / sum;
  std::vector<std::int64_t> taps;
  taps.reserve(raw.size());
  for (double w : raw) taps.push_back(std::llround(w * scale));
  return taps;
}

CannyTrace canny_trace(const RasterImage& gray, const CannyParams& params) {
  require_gray(gray, "canny");
  params.validate();
  const int w = gray.width();
  const int h = gray.height();
  if (std::min(w, h) < 3) {
    throw ImageTooSmall("canny: minimum dimension is 3, got " + std::to_string(w) + "x" +
                        std::to_string(h));
  }
  const auto taps = gaussian_taps(params.sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const std::size_t n = static_cast<std::size_t>(w) * h;

  // Separable smoothing, clamp-to-edge.
  std::vector<std::int64_t> tmp(n), smooth(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * gray.at(clamp_index(x + k, w), y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * tmp[static_cast<std::size_t>(clamp_index(y + k, h)) * w + x];
      }
      smooth[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }

  auto s = [&](int x, int y) {
    return smooth[static_cast<std::size_t>(clamp_index(y, h)) * w + clamp_index(x, w)];
  };

  CannyTrace trace;
  trace.width = w;
  trace.height = h;
  trace.magnitude2.assign(n, 0);
  trace.nms.assign(n, 0);
  trace.edges.assign(n, 0);
  std::vector<std::uint8_t> bins(n);
  std::int64_t gmax2 = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t gx = (s(x + 1, y - 1) + 2 * s(x + 1, y) + s(x + 1, y + 1)) -
                              (s(x - 1, y - 1) + 2 * s(x - 1, y) + s(x - 1, y + 1));
      const std::int64_t gy = (s(x - 1, y + 1) + 2 * s(x, y + 1) + s(x + 1, y + 1)) -
                              (s(x - 1, y - 1) + 2 * s(x, y - 1) + s(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      trace.magnitude2[i] = gx * gx + gy * gy;
      bins[i] = direction_bin(gx, gy);
      gmax2 = std::max(gmax2, trace.magnitude2[i]);
    }
  }
  if (gmax2 == 0) return trace;

  const double gmax = std::sqrt(static_cast<double>(gmax2));
  trace.low_threshold = params.low_ratio * gmax;
  trace.high_threshold = params.high_ratio * gmax;

  auto mag2 = [&](int x, int y) {
    return trace.magnitude2[static_cast<std::size_t>(clamp_index(y, h)) * w + clamp_index(x, w)];
  };

  // Non-maximum suppression: >= the "before" neighbor, > the "after" one, so a
  // symmetric ridge keeps exactly one pixel.
  std::vector<std::uint8_t> strong(n, 0), weak(n, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const std::int64_t m = trace.magnitude2[i];
      if (m == 0) continue;
      const auto [dx, dy] = kAfter[bins[i]];
      if (m >= mag2(x - dx, y - dy) && m > mag2(x + dx, y + dy)) {
        trace.nms[i] = 1;
        const double mag = std::sqrt(static_cast<double>(m));
        weak[i] = mag >= trace.low_threshold;
        strong[i] = mag >= trace.high_threshold;
      }
    }
  }

  // Hysteresis: weak pixels 8-connected to a strong pixel.
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    if (strong[i]) {
      trace.edges[i] = 1;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (weak[j] && !trace.edges[j]) {
          trace.edges[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return trace;
}

VisualAbstract canny(const RasterImage& gray, const CannyParams& params) {
  const CannyTrace trace = canny_trace(gray, params);
  const nlohmann::json p = {{"sigma", params.sigma},
                            {"low_ratio", params.low_ratio},
                            {"high_ratio", params.high_ratio},
                            {"polarity", to_string(params.polarity)}};
  return make_bilevel(trace.width, trace.height, trace.edges, params.polarity,
                      AbstractStyle::Canny, image_digest(gray), p.dump());
}

Sample otsu_threshold(const RasterImage& gray) {
  require_gray(gray, "otsu");
  const auto px = gray.pixels();
  if (px.size() > (std::size_t{1} << 28)) {
    throw std::invalid_argument("otsu: images above 2^28 pixels are not supported");
  }
  std::array<std::uint64_t, 256> hist{};
  for (Sample v : px) ++hist[v];

  const auto total_n = static_cast<std::int64_t>(px.size());
  std::int64_t total_s = 0;
  for (int v = 0; v < 256; ++v) total_s += static_cast<std::int64_t>(hist[v]) * v;

  // Between-class variance for split t is proportional to
  //   (s0 * N - S * n0)^2 / (n0 * n1),
  // compared exactly by cross-multiplication.
  int best_t = 0;
  u128 best_num = 0;
  std::uint64_t best_den = 1;
  std::int64_t n0 = 0;
  std::int64_t s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += static_cast<std::int64_t>(hist[t]);
    s0 += static_cast<std::int64_t>(hist[t]) * t;
    const std::int64_t n1 = total_n - n0;
    if (n0 == 0 || n1 == 0) continue;
    const i128 diff = static_cast<i128>(s0) * total_n - static_cast<i128>(total_s) * n0;
    const auto a = static_cast<u128>(diff < 0 ? -diff : diff);
    const u128 num = a * a;
    const auto den = static_cast<std::uint64_t>(n0) * static_cast<std::uint64_t>(n1);
    if (compare(mul_u128_u64(num, best_den), mul_u128_u64(best_num, den)) > 0) {
      best_t = t;
      best_num = num;
      best_den = den;
    }
  }
  return static_cast<Sample>(best_t);
}

VisualAbstract otsu_binarize(const RasterImage& gray, Polarity polarity) {
  const Sample t = otsu_threshold(gray);
  const auto px = gray.pixels();
  const bool invert = polarity == Polarity::LightOnBlack;
  std::vector<Sample> out(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    out[i] = ((px[i] > t) != invert) ? 255 : 0;
  }
  const nlohmann::json p = {{"threshold", t}, {"polarity", to_string(polarity)}};
  return VisualAbstract{RasterImage(gray.width(), gray.height(), 1, std::move(out)),
                        AbstractStyle::Binary, image_digest(gray), p.dump()};
}

VisualAbstract abstract_image(const RasterImage& img, AbstractStyle style,
                              const AbstractionConfig& config) {
  switch (style) {
    case AbstractStyle::Canny: {
      VisualAbstract out = canny(to_grayscale(img), config.canny);
      out.source_digest = image_digest(img);
      return out;
    }
    case AbstractStyle::Binary: {
      VisualAbstract out = otsu_binarize(to_grayscale(img), config.binary_polarity);
      out.source_digest = image_digest(img);
      return out;
    }
    default: break;
  }
  if (!config.sketcher) {
    throw SketcherUnavailable("no sketcher endpoint configured for style '" +
                              std::string(to_string(style)) + "'");
  }
  const SketchResult result = config.sketcher->sketch(encode_png(img), to_string(style));
  RasterImage sketch = [&] {
    try {
      return to_grayscale(decode_image(result.png));
    } catch (const DecodeError& e) {
      throw SketcherProtocolError(std::string("sketcher returned an undecodable image: ") +
                                  e.what());
    }
  }();
  const nlohmann::json p = {{"model_id", result.model_id},
                            {"millis", result.millis},
                            {"width", sketch.width()},
                            {"height", sketch.height()},
                            {"source_width", img.width()},
                            {"source_height", img.height()}};
  return VisualAbstract{std::move(sketch), style, image_digest(img), p.dump()};
}

AbstractStyle select_style(std::string_view task_category) noexcept {
  std::string key;
  for (unsigned char c : task_category) {
    if (std::isalnum(c)) key.push_back(static_cast<char>(std::tolower(c)));
  }
  struct Rule {
    std::string_view category;
    AbstractStyle style;
  };
  static constexpr std::array<Rule, 11> kRules{{
      {"oddoneout", AbstractStyle::OpenSketch},
      {"visualillusion", AbstractStyle::PhotoSketch},
      {"blinkspatial", AbstractStyle::PhotoSketch},
      {"blinkcount", AbstractStyle::OpenSketch},
      {"blinksemcorr", AbstractStyle::OpenSketch},
      {"blinkviscorr", AbstractStyle::OpenSketch},
      {"cospacedirrec", AbstractStyle::Contour},
      {"cospacedirobj", AbstractStyle::Anime},
      {"cospacerotang", AbstractStyle::PhotoSketch},
      {"cospacerotdiff", AbstractStyle::OpenSketch},
      {"cospacecount", AbstractStyle::PhotoSketch},
  }};
  for (const auto& rule : kRules) {
    if (key == rule.category) return rule.style;
  }
  return AbstractStyle::OpenSketch;
}

}  // namespace vat
