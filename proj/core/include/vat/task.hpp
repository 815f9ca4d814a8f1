// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vat/image.hpp"

namespace vat {

struct OptionChoice {
  std::string label;
  std::string text;

  friend bool operator==(const OptionChoice&, const OptionChoice&) = default;
};

struct GridHint {
  int rows = 0;
  int cols = 0;

  friend bool operator==(const GridHint&, const GridHint&) = default;
};

/// One benchmark question as it appears in a task manifest.
struct TaskInstance {
  std::string id;
  std::string benchmark;
  std::string category;
  std::vector<std::filesystem::path> images;  // resolved against the manifest directory
  std::string question;
  std::vector<OptionChoice> options;          // label order as written
  std::string ground_truth;
  std::vector<std::vector<BoundingBox>> gt_boxes;  // per image; empty when absent
  std::optional<GridHint> grid_hint;

  bool has_gt_boxes() const noexcept {
    for (const auto& boxes : gt_boxes) {
      if (!boxes.empty()) return true;
    }
    return false;
  }

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

}  // namespace vat
