// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "oracles/canny_reference.hpp"
#include "oracles/otsu_reference.hpp"
#include "support/test_support.hpp"
#include "vat/abstraction.hpp"
#include "vat/digest.hpp"
#include "vat/error.hpp"
#include "vat/sketcher_client.hpp"

using namespace vat;

namespace {

std::vector<std::uint8_t> bytes_of(const RasterImage& img) {
  return {img.pixels().begin(), img.pixels().end()};
}

class FakeSketcher : public SketchClient {
 public:
  std::string returned;
  std::string last_style;
  int calls = 0;

  SketchResult sketch(std::string_view png, std::string_view style) override {
    ++calls;
    last_style = std::string(style);
    if (!returned.empty()) return {returned, "fake", 1.0};
    return {encode_png(canny(to_grayscale(decode_image(png))).image), "fake-canny", 2.5};
  }
  std::vector<std::string> styles() override { return {"canny-fallback"}; }
};

}  // namespace

TEST(Canny, TapsAreSymmetricAndSumNearThousand) {
  for (double sigma : {0.5, 1.0, 1.4, 2.0, 3.3}) {
    const auto taps = gaussian_taps(sigma);
    ASSERT_EQ(taps.size() % 2, 1u);
    EXPECT_EQ(static_cast<int>(taps.size() / 2), static_cast<int>(std::ceil(3 * sigma)));
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < taps.size(); ++i) {
      EXPECT_EQ(taps[i], taps[taps.size() - 1 - i]);
      sum += taps[i];
    }
    EXPECT_NEAR(static_cast<double>(sum), 1000.0, static_cast<double>(taps.size()));
  }
}

TEST(Canny, MatchesStraightLineReference) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 8; ++i) {
    const int w = 8 + i * 3;
    const int h = 9 + i;
    const RasterImage img = vat::test::random_gray(w, h, rng);
    const double sigma = 0.6 + 0.3 * i;
    const CannyTrace trace = canny_trace(img, {sigma, 0.1, 0.3, Polarity::DarkOnWhite});
    const auto ref = oracle::canny_reference(bytes_of(img), w, h, sigma, 0.1, 0.3);
    EXPECT_EQ(trace.magnitude2, ref.mag2) << "image " << i;
    EXPECT_EQ(trace.edges, ref.edges) << "image " << i;
  }
}

TEST(Canny, FlatImageHasNoEdges) {
  const RasterImage flat(16, 16, 1, Sample{77});
  const VisualAbstract a = canny(flat);
  for (Sample s : a.image.pixels()) EXPECT_EQ(s, 255);
}

TEST(Canny, StepEdgeGivesOneThinLine) {
  RasterImage img(16, 16, 1, Sample{0});
  for (int y = 0; y < 16; ++y) {
    for (int x = 8; x < 16; ++x) img.mutable_pixels()[y * 16 + x] = 255;
  }
  const CannyTrace t = canny_trace(img, {});
  for (int y = 0; y < 16; ++y) {
    int count = 0;
    for (int x = 0; x < 16; ++x) count += t.edges[y * 16 + x];
    EXPECT_EQ(count, 1) << "row " << y;
  }
}

TEST(Canny, PolarityAndProvenance) {
  const RasterImage img = vat::test::square_image(20, 20, 5, 5, 15, 15);
  const VisualAbstract dark = canny(img, {1.0, 0.1, 0.2, Polarity::DarkOnWhite});
  const VisualAbstract light = canny(img, {1.0, 0.1, 0.2, Polarity::LightOnBlack});
  ASSERT_EQ(dark.image.pixels().size(), light.image.pixels().size());
  bool any_edge = false;
  for (std::size_t i = 0; i < dark.image.pixels().size(); ++i) {
    EXPECT_EQ(dark.image.pixels()[i], 255 - light.image.pixels()[i]);
    any_edge = any_edge || dark.image.pixels()[i] == 0;
  }
  EXPECT_TRUE(any_edge);
  EXPECT_EQ(dark.source_digest, image_digest(img));
  EXPECT_EQ(dark.style, AbstractStyle::Canny);
}

TEST(Canny, RejectsBadInput) {
  EXPECT_THROW(canny(RasterImage(2, 10, 1, Sample{0})), ImageTooSmall);
  EXPECT_THROW(canny(RasterImage(10, 10, 3, Sample{0})), std::invalid_argument);
  const RasterImage ok(10, 10, 1, Sample{0});
  EXPECT_THROW(canny(ok, {0.0, 0.1, 0.2, Polarity::DarkOnWhite}), std::invalid_argument);
  EXPECT_THROW(canny(ok, {51.0, 0.1, 0.2, Polarity::DarkOnWhite}), std::invalid_argument);
  EXPECT_THROW(canny(ok, {1.0, 0.3, 0.2, Polarity::DarkOnWhite}), std::invalid_argument);
}

TEST(Otsu, MatchesExhaustiveReferences) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    const RasterImage img = vat::test::random_gray(7 + i, 5 + i % 4, rng);
    std::array<std::uint64_t, 256> hist{};
    for (Sample s : img.pixels()) ++hist[s];
    const int t = otsu_threshold(img);
    EXPECT_EQ(t, oracle::otsu_between_class(hist));
    EXPECT_EQ(t, oracle::otsu_within_class(hist));
  }
}

TEST(Otsu, BimodalSplitsBetweenModes) {
  std::vector<Sample> px;
  for (int i = 0; i < 50; ++i) px.push_back(static_cast<Sample>(40 + i % 5));
  for (int i = 0; i < 50; ++i) px.push_back(static_cast<Sample>(200 + i % 5));
  const RasterImage img(10, 10, 1, px);
  const int t = otsu_threshold(img);
  EXPECT_GE(t, 44);
  EXPECT_LT(t, 200);
  const VisualAbstract b = otsu_binarize(img);
  EXPECT_EQ(b.image.at(0, 0), 0);    // dark sample -> ink
  EXPECT_EQ(b.image.at(0, 9), 255);  // light sample -> background
  const VisualAbstract inv = otsu_binarize(img, Polarity::LightOnBlack);
  EXPECT_EQ(inv.image.at(0, 0), 255);
}

TEST(Otsu, ConstantImageIsAllOneClass) {
  const RasterImage img(4, 4, 1, Sample{128});
  EXPECT_EQ(otsu_threshold(img), 0);
  const VisualAbstract b = otsu_binarize(img);
  for (Sample s : b.image.pixels()) EXPECT_EQ(s, 255);
}

TEST(Abstraction, NativeStylesWorkOnColorInput) {
  std::mt19937_64 rng(1);
  const RasterImage rgb = vat::test::random_rgb(12, 10, rng);
  const VisualAbstract c = abstract_image(rgb, AbstractStyle::Canny);
  EXPECT_EQ(c.image.channels(), 1);
  EXPECT_EQ(c.image.width(), 12);
  EXPECT_EQ(c.source_digest, image_digest(rgb));
  EXPECT_EQ(c.image, canny(to_grayscale(rgb)).image);
  const VisualAbstract b = abstract_image(rgb, AbstractStyle::Binary);
  EXPECT_EQ(b.image, otsu_binarize(to_grayscale(rgb)).image);
}

TEST(Abstraction, NeuralStylesNeedASketcher) {
  const RasterImage img = vat::test::square_image(16, 16, 4, 4, 12, 12);
  EXPECT_THROW(abstract_image(img, AbstractStyle::OpenSketch), SketcherUnavailable);

  auto fake = std::make_shared<FakeSketcher>();
  AbstractionConfig cfg;
  cfg.sketcher = fake;
  const VisualAbstract a = abstract_image(img, AbstractStyle::PhotoSketch, cfg);
  EXPECT_EQ(fake->last_style, "photosketch");
  EXPECT_EQ(a.style, AbstractStyle::PhotoSketch);
  EXPECT_EQ(a.image.width(), 16);
  EXPECT_NE(a.params.find("fake-canny"), std::string::npos);

  fake->returned = "garbage";
  EXPECT_THROW(abstract_image(img, AbstractStyle::Anime, cfg), SketcherProtocolError);
}

TEST(Abstraction, StyleNamesAndRuleTable) {
  EXPECT_EQ(parse_style("OpenSketch"), AbstractStyle::OpenSketch);
  EXPECT_EQ(parse_style(" canny "), AbstractStyle::Canny);
  EXPECT_FALSE(parse_style("watercolor"));
  for (auto s : all_styles()) EXPECT_EQ(parse_style(to_string(s)), s);

  EXPECT_EQ(select_style("Odd-One-Out"), AbstractStyle::OpenSketch);
  EXPECT_EQ(select_style("Visual Illusion"), AbstractStyle::PhotoSketch);
  EXPECT_EQ(select_style("BLINK Spatial"), AbstractStyle::PhotoSketch);
  EXPECT_EQ(select_style("BLINK Count"), AbstractStyle::OpenSketch);
  EXPECT_EQ(select_style("CoSpace Dir-Rec"), AbstractStyle::Contour);
  EXPECT_EQ(select_style("CoSpace Dir-Obj"), AbstractStyle::Anime);
  EXPECT_EQ(select_style("CoSpace Rot-Ang"), AbstractStyle::PhotoSketch);
  EXPECT_EQ(select_style("CoSpace Count"), AbstractStyle::PhotoSketch);
  EXPECT_EQ(select_style("something else"), AbstractStyle::OpenSketch);
}
