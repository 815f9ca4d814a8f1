// SPDX-License-Identifier: Apache-2.0

#include "vat/region.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

#include "vat/error.hpp"
#include "vat/random.hpp"

namespace vat {

namespace {

void check_grid(const RasterImage& img, const GridSpec& grid) {
  if (img.width() != grid.width || img.height() != grid.height) {
    throw DimensionMismatch("grid is " + std::to_string(grid.width) + "x" +
                            std::to_string(grid.height) + " but image is " +
                            std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
}

void check_indices(const GridSpec& grid, std::span<const std::size_t> blocks) {
  for (std::size_t b : blocks) {
    if (b >= grid.size()) {
      throw std::out_of_range("block index " + std::to_string(b) + " outside grid of " +
                              std::to_string(grid.size()));
    }
  }
}

RasterImage paste_blocks(const RasterImage& base, const RasterImage& source, const GridSpec& grid,
                         std::span<const std::size_t> blocks) {
  check_grid(base, grid);
  if (source.width() != base.width() || source.height() != base.height()) {
    throw DimensionMismatch("abstract is " + std::to_string(source.width()) + "x" +
                            std::to_string(source.height()) + " but base is " +
                            std::to_string(base.width()) + "x" + std::to_string(base.height()));
  }
  if (source.channels() > base.channels()) {
    throw DimensionMismatch("cannot paste an RGB abstract onto a gray base");
  }
  check_indices(grid, blocks);
  const RasterImage src = expand_channels(source, base.channels());
  RasterImage out = base;
  const int ch = base.channels();
  for (std::size_t b : blocks) {
    const BoundingBox& r = grid.blocks[b];
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        for (int c = 0; c < ch; ++c) out.at(x, y, c) = src.at(x, y, c);
      }
    }
  }
  return out;
}

}  // namespace

std::size_t GridSpec::block_at(int x, int y) const noexcept {
  const int bw = width / cols;
  const int bh = height / rows;
  const int c = std::min(x / bw, cols - 1);
  const int r = std::min(y / bh, rows - 1);
  return static_cast<std::size_t>(r) * cols + c;
}

GridSpec make_grid(int width, int height, int rows, int cols) {
  if (rows < 1 || cols < 1) throw InvalidGrid("rows and cols must be >= 1");
  if (width < 1 || height < 1) throw InvalidGrid("image dimensions must be >= 1");
  if (cols > width || rows > height) {
    throw InvalidGrid("grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " has empty blocks on a " + std::to_string(width) + "x" +
                      std::to_string(height) + " image");
  }
  GridSpec grid{width, height, rows, cols, {}};
  grid.blocks.reserve(static_cast<std::size_t>(rows) * cols);
  const int bw = width / cols;
  const int bh = height / rows;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      grid.blocks.push_back(BoundingBox{c * bw, r * bh, c == cols - 1 ? width : (c + 1) * bw,
                                        r == rows - 1 ? height : (r + 1) * bh});
    }
  }
  return grid;
}

std::vector<std::size_t> BlockLabels::gt_blocks() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == BlockLabel::GT) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> BlockLabels::non_gt_blocks() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == BlockLabel::NonGT) out.push_back(i);
  }
  return out;
}

BlockLabels label_blocks(const GridSpec& grid, std::span<const BoundingBox> gt_boxes) {
  BlockLabels out;
  out.labels.assign(grid.size(), BlockLabel::NonGT);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (const auto& box : gt_boxes) {
      if (grid.blocks[i].overlap_area(box) > 0) {
        out.labels[i] = BlockLabel::GT;
        break;
      }
    }
  }
  return out;
}

RasterImage compose_present(const RasterImage& base, const VisualAbstract& abstract,
                            const GridSpec& grid, std::span<const std::size_t> selected) {
  return paste_blocks(base, abstract.image, grid, selected);
}

RasterImage compose_transition(const RasterImage& original, const VisualAbstract& abstract,
                               const GridSpec& grid, std::span<const std::size_t> abstracted) {
  return paste_blocks(original, abstract.image, grid, abstracted);
}

RasterImage mask_white(const RasterImage& original, const GridSpec& grid,
                       std::span<const std::size_t> blocks) {
  return paste_blocks(original, blank_like(original, 255), grid, blocks);
}

std::string_view to_string(RevealStrategy strategy) noexcept {
  switch (strategy) {
    case RevealStrategy::GTFirst: return "gt-first";
    case RevealStrategy::RedundancyFirst: return "redundancy-first";
    case RevealStrategy::Random: return "random";
  }
  return "unknown";
}

std::optional<RevealStrategy> parse_reveal_strategy(std::string_view name) noexcept {
  std::string key;
  for (char c : name) {
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "gtfirst") return RevealStrategy::GTFirst;
  if (key == "redundancyfirst") return RevealStrategy::RedundancyFirst;
  if (key == "random") return RevealStrategy::Random;
  return std::nullopt;
}

RevealOrder reveal_schedule(const BlockLabels& labels, RevealStrategy strategy,
                            std::uint64_t seed) {
  RevealOrder order{strategy, seed, {}};
  const auto gt = labels.gt_blocks();
  const auto rest = labels.non_gt_blocks();
  switch (strategy) {
    case RevealStrategy::GTFirst:
      order.sequence = gt;
      order.sequence.insert(order.sequence.end(), rest.begin(), rest.end());
      break;
    case RevealStrategy::RedundancyFirst:
      order.sequence = rest;
      order.sequence.insert(order.sequence.end(), gt.begin(), gt.end());
      break;
    case RevealStrategy::Random: {
      order.sequence.resize(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) order.sequence[i] = i;
      Rng rng(seed);
      rng.shuffle(order.sequence);
      break;
    }
  }
  return order;
}

std::vector<std::size_t> sample_gt_blocks(const BlockLabels& labels, std::size_t count,
                                          std::uint64_t seed) {
  auto gt = labels.gt_blocks();
  Rng rng(seed);
  rng.shuffle(gt);
  gt.resize(std::min(count, gt.size()));
  std::sort(gt.begin(), gt.end());
  return gt;
}

std::vector<std::size_t> complement_blocks(const GridSpec& grid,
                                           std::span<const std::size_t> selected) {
  std::vector<bool> taken(grid.size(), false);
  check_indices(grid, selected);
  for (std::size_t b : selected) taken[b] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!taken[i]) out.push_back(i);
  }
  return out;
}

}  // namespace vat
