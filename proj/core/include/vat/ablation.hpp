// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vat/harness.hpp"
#include "vat/region.hpp"

namespace vat {

enum class AblationKind {
  PresentOnBlank,        // abstract blocks pasted on a white base, shown next to I
  TransitionToAbstract,  // I with some blocks in abstract form, shown next to I
  WhiteMask,             // I alone with the unselected blocks painted white
};

std::string_view to_string(AblationKind kind) noexcept;
std::optional<AblationKind> parse_ablation_kind(std::string_view name) noexcept;

enum class Selection { NonGT, RandGT, AllGT };

std::string_view to_string(Selection selection) noexcept;

struct AblationSetting {
  AblationKind kind = AblationKind::PresentOnBlank;
  int rows = 3;  // used when the task has no grid hint
  int cols = 3;
  std::uint64_t seed = 0;
  int rand_gt_seeds = 1;          // Rand-GT draws averaged per task
  std::size_t rand_gt_blocks = 1;  // GT blocks kept per Rand-GT draw
  AbstractStyle style = AbstractStyle::OpenSketch;
};

/// Annotation keys attached to ablation image parts (read by scripted mocks).
inline constexpr std::string_view kAnnoGtBlocks = "abstract_gt_blocks";
inline constexpr std::string_view kAnnoNonGtBlocks = "abstract_nongt_blocks";
inline constexpr std::string_view kAnnoBlocks = "blocks";

/// Grid for `image` of `task`: the task's hint when present, else the setting's.
GridSpec ablation_grid(const TaskInstance& task, const RasterImage& image, const AblationSetting& setting);

/// Block labels of image `index` (no boxes means every block is non-GT).
BlockLabels ablation_labels(const TaskInstance& task, std::size_t index, const GridSpec& grid);

/// The prompt for one selection of blocks per image. For PresentOnBlank and
/// TransitionToAbstract `selected[i]` lists the blocks of image i shown in
/// abstract form; for WhiteMask it lists the blocks left visible.
PromptBundle build_ablation_prompt(PreparedTask& task, const AblationSetting& setting,
                                   const AbstractionConfig& abstraction,
                                   std::span<const std::vector<std::size_t>> selected);

struct SelectionAccuracy {
  std::string level;  // "img", "non-gt", "rand-gt", "all-gt", "vat"
  std::size_t n = 0;
  double accuracy = 0.0;
};

struct RegionAblationResult {
  AblationSetting setting;
  std::vector<SelectionAccuracy> levels;
  std::vector<EvalRecord> records;

  const SelectionAccuracy* find(std::string_view level) const noexcept;
};

/// Evaluates every task at the Non-GT, Rand-GT, and All-GT selections plus
/// the image-only (Standard) and full VAT anchors. Throws MissingGtBoxes
/// when a task has no GT boxes.
RegionAblationResult run_region_ablation(Evaluator& evaluator, std::span<const TaskInstance> tasks,
                                         const AblationSetting& setting);

struct TrendCurve {
  std::string task_id;
  std::string order;  // reveal strategy name
  std::uint64_t seed = 0;
  std::vector<std::size_t> sequence;
  std::vector<std::pair<int, double>> points;  // (revealed blocks, logprob)
  double anchor_empty = 0.0;  // (I, blank) or (I, I) prompt
  double anchor_full = 0.0;   // full VAT prompt
};

/// Log-probability reported for the first generated token equal to `answer`
/// (then the first matching alternative); kLogprobFloor when absent.
/// Throws LogprobsUnsupported when the response has no log-probabilities.
inline constexpr double kLogprobFloor = -100.0;
double answer_logprob(const ModelResponse& response, std::string_view answer);

/// Reveal curve for a single-image task. Points t = 0..N show the first t
/// blocks of `order` in abstract form. Throws LogprobsUnsupported when the
/// gateway cannot return log-probabilities.
TrendCurve run_logprob_trend(Evaluator& evaluator, const TaskInstance& task, const RevealOrder& order,
                             const AblationSetting& setting);
TrendCurve run_logprob_trend(Evaluator& evaluator, const TaskInstance& task, RevealStrategy strategy,
                             const AblationSetting& setting);

std::vector<CurveRow> to_curve_rows(std::span<const TrendCurve> curves);

/// The six prompt formats: Blank, Img, Vis.Abs, VAT w/ Blank, VAT w/ Img, VAT.
std::span<const PromptMode> format_sweep_modes() noexcept;

struct FormatSweepResult {
  std::vector<std::pair<PromptMode, double>> columns;
  std::vector<EvalRecord> records;

  std::string to_markdown() const;
};

FormatSweepResult run_format_sweep(Gateway& gateway, const EvalOptions& options,
                                   std::span<const TaskInstance> tasks,
                                   std::span<const PromptMode> modes = format_sweep_modes());

}  // namespace vat
