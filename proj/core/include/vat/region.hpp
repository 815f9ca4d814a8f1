// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <optional>
#include <vector>

#include "vat/abstraction.hpp"
#include "vat/image.hpp"

namespace vat {

/// Partition of a width x height image into rows x cols rectangles, row-major.
/// Interior blocks are floor(W/cols) x floor(H/rows); the last column and the
/// last row absorb the remainders.
struct GridSpec {
  int width = 0;
  int height = 0;
  int rows = 0;
  int cols = 0;
  std::vector<BoundingBox> blocks;

  std::size_t size() const noexcept { return blocks.size(); }
  /// Index of the block containing pixel (x, y).
  std::size_t block_at(int x, int y) const noexcept;
};

/// Throws InvalidGrid when rows/cols < 1 or a block would be empty.
GridSpec make_grid(int width, int height, int rows, int cols);

enum class BlockLabel : std::uint8_t { NonGT, GT };

struct BlockLabels {
  std::vector<BlockLabel> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::vector<std::size_t> gt_blocks() const;
  std::vector<std::size_t> non_gt_blocks() const;
};

/// A block is GT iff it intersects some box with positive area.
BlockLabels label_blocks(const GridSpec& grid, std::span<const BoundingBox> gt_boxes);

/// `base` with the selected blocks replaced by the abstract's pixels. A gray
/// abstract is replicated across channels when `base` is RGB.
RasterImage compose_present(const RasterImage& base, const VisualAbstract& abstract,
                            const GridSpec& grid, std::span<const std::size_t> selected);

/// `original` with the abstracted blocks shown in abstract form.
RasterImage compose_transition(const RasterImage& original, const VisualAbstract& abstract,
                               const GridSpec& grid, std::span<const std::size_t> abstracted);

/// Selected blocks set to 255 on every channel.
RasterImage mask_white(const RasterImage& original, const GridSpec& grid,
                       std::span<const std::size_t> blocks);

enum class RevealStrategy { GTFirst, RedundancyFirst, Random };

std::string_view to_string(RevealStrategy strategy) noexcept;
std::optional<RevealStrategy> parse_reveal_strategy(std::string_view name) noexcept;

struct RevealOrder {
  RevealStrategy strategy = RevealStrategy::GTFirst;
  std::uint64_t seed = 0;
  std::vector<std::size_t> sequence;  // permutation of block indices
};

/// GTFirst / RedundancyFirst keep ascending block order inside each label
/// class; Random is a seeded permutation.
RevealOrder reveal_schedule(const BlockLabels& labels, RevealStrategy strategy,
                            std::uint64_t seed = 0);

/// `count` distinct GT blocks drawn uniformly with `seed`, ascending. Fewer are
/// returned when the image has fewer GT blocks.
std::vector<std::size_t> sample_gt_blocks(const BlockLabels& labels, std::size_t count,
                                          std::uint64_t seed);

/// Blocks not in `selected`, ascending.
std::vector<std::size_t> complement_blocks(const GridSpec& grid,
                                           std::span<const std::size_t> selected);

}  // namespace vat
