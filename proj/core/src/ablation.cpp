// SPDX-License-Identifier: Apache-2.0

#include "vat/ablation.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include "vat/error.hpp"
#include "vat/random.hpp"

namespace vat {

namespace {

std::map<std::string, double> block_annotations(const BlockLabels& labels, std::span<const std::size_t> selected) {
  double gt = 0;
  double nongt = 0;
  for (auto b : selected) {
    (labels.labels.at(b) == BlockLabel::GT ? gt : nongt) += 1;
  }
  return {{std::string(kAnnoGtBlocks), gt},
          {std::string(kAnnoNonGtBlocks), nongt},
          {std::string(kAnnoBlocks), static_cast<double>(labels.size())}};
}

std::string ablation_label(const AblationSetting& setting, std::string_view level) {
  return "ablate:" + std::string(to_string(setting.kind)) + ":" + std::string(level);
}

std::string answer_token(std::string_view ground_truth) {
  return extract_answer("ANSWER: " + std::string(ground_truth));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(AblationKind kind) noexcept {
  switch (kind) {
    case AblationKind::PresentOnBlank: return "present-on-blank";
    case AblationKind::TransitionToAbstract: return "transition";
    case AblationKind::WhiteMask: return "white-mask";
  }
  return "?";
}

std::optional<AblationKind> parse_ablation_kind(std::string_view name) noexcept {
  for (auto k : {AblationKind::PresentOnBlank, AblationKind::TransitionToAbstract, AblationKind::WhiteMask}) {
    if (name == to_string(k)) return k;
  }
  if (name == "blank" || name == "i") return AblationKind::PresentOnBlank;
  if (name == "transition-to-abstract" || name == "ii") return AblationKind::TransitionToAbstract;
  if (name == "mask") return AblationKind::WhiteMask;
  return std::nullopt;
}

std::string_view to_string(Selection selection) noexcept {
  switch (selection) {
    case Selection::NonGT: return "non-gt";
    case Selection::RandGT: return "rand-gt";
    case Selection::AllGT: return "all-gt";
  }
  return "?";
}

GridSpec ablation_grid(const TaskInstance& task, const RasterImage& image, const AblationSetting& setting) {
  const int rows = task.grid_hint ? task.grid_hint->rows : setting.rows;
  const int cols = task.grid_hint ? task.grid_hint->cols : setting.cols;
  return make_grid(image.width(), image.height(), rows, cols);
}

BlockLabels ablation_labels(const TaskInstance& task, std::size_t index, const GridSpec& grid) {
  static const std::vector<BoundingBox> kNone;
  const auto& boxes = index < task.gt_boxes.size() ? task.gt_boxes[index] : kNone;
  return label_blocks(grid, boxes);
}

PromptBundle build_ablation_prompt(PreparedTask& task, const AblationSetting& setting,
                                   const AbstractionConfig& abstraction,
                                   std::span<const std::vector<std::size_t>> selected) {
  const auto& originals = task.originals();
  if (selected.size() != originals.size()) {
    throw std::invalid_argument("one block selection per image is required");
  }
  const std::vector<VisualAbstract>* abstracts = nullptr;
  if (setting.kind != AblationKind::WhiteMask) abstracts = &task.abstracts(setting.style, abstraction);

  std::vector<ImagePart> seconds;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const RasterImage& original = originals[i]->image;
    const GridSpec grid = ablation_grid(task.task(), original, setting);
    const BlockLabels labels = ablation_labels(task.task(), i, grid);
    RasterImage composite = [&] {
      switch (setting.kind) {
        case AblationKind::PresentOnBlank: {
          const VisualAbstract& a = (*abstracts)[i];
          return compose_present(blank_like(a.image), a, grid, selected[i]);
        }
        case AblationKind::TransitionToAbstract:
          return compose_transition(original, (*abstracts)[i], grid, selected[i]);
        case AblationKind::WhiteMask:
          break;
      }
      const auto hidden = complement_blocks(grid, selected[i]);
      return mask_white(original, grid, hidden);
    }();
    seconds.push_back(ImagePart{encode_for_prompt(std::move(composite)), PartRole::Composite,
                                block_annotations(labels, selected[i])});
  }

  if (setting.kind == AblationKind::WhiteMask) {
    return build_single_prompt(task.task().question, std::move(seconds), PromptMode::ImgOnly);
  }
  PromptBundle bundle = build_dual_prompt(task.task().question, originals, std::move(seconds), PromptMode::VAT);
  bundle.abstract_styles = {setting.style};
  return bundle;
}

const SelectionAccuracy* RegionAblationResult::find(std::string_view level) const noexcept {
  for (const auto& l : levels) {
    if (l.level == level) return &l;
  }
  return nullptr;
}

RegionAblationResult run_region_ablation(Evaluator& evaluator, std::span<const TaskInstance> tasks,
                                         const AblationSetting& setting) {
  for (const auto& t : tasks) {
    if (!t.has_gt_boxes()) throw MissingGtBoxes("task '" + t.id + "' has no gt_boxes");
  }
  if (setting.rand_gt_seeds < 1) throw std::invalid_argument("rand_gt_seeds must be >= 1");

  static constexpr std::array<std::string_view, 5> kLevels{"img", "non-gt", "rand-gt", "all-gt", "vat"};
  const AbstractionConfig& abstraction = evaluator.options().abstraction;
  std::vector<std::vector<EvalRecord>> per_task(tasks.size());

  parallel_for(
      tasks.size(), evaluator.options().parallelism,
      [&](std::size_t ti) {
        PreparedTask prepared(tasks[ti]);
        auto& out = per_task[ti];
        const TaskInstance& task = prepared.task();

        // Image-only anchor.
        EvalRecord img = evaluator.evaluate(prepared, PromptMode::Standard);
        img.label = ablation_label(setting, "img");
        out.push_back(std::move(img));

        std::vector<GridSpec> grids;
        std::vector<BlockLabels> labels;
        try {
          for (std::size_t i = 0; i < task.images.size(); ++i) {
            grids.push_back(ablation_grid(task, prepared.originals()[i]->image, setting));
            labels.push_back(ablation_labels(task, i, grids.back()));
          }
        } catch (const std::exception& e) {
          for (auto level : std::span(kLevels).subspan(1)) {
            EvalRecord r;
            r.task_id = task.id;
            r.category = task.category;
            r.label = ablation_label(setting, level);
            r.mode = setting.kind == AblationKind::WhiteMask ? PromptMode::ImgOnly : PromptMode::VAT;
            r.error = e.what();
            out.push_back(std::move(r));
          }
          return;
        }

        auto run_selection = [&](std::string_view level, const std::vector<std::vector<std::size_t>>& sel,
                                 int trial) {
          PromptBundle bundle;
          try {
            bundle = build_ablation_prompt(prepared, setting, abstraction, sel);
          } catch (const std::exception& e) {
            EvalRecord r;
            r.task_id = task.id;
            r.category = task.category;
            r.label = ablation_label(setting, level);
            r.mode = setting.kind == AblationKind::WhiteMask ? PromptMode::ImgOnly : PromptMode::VAT;
            r.trial = trial;
            r.error = e.what();
            out.push_back(std::move(r));
            return;
          }
          out.push_back(evaluator.evaluate_bundle(task, ablation_label(setting, level), bundle, {}, trial));
        };

        std::vector<std::vector<std::size_t>> sel(task.images.size());
        for (std::size_t i = 0; i < sel.size(); ++i) sel[i] = labels[i].non_gt_blocks();
        run_selection("non-gt", sel, 0);

        for (int s = 0; s < setting.rand_gt_seeds; ++s) {
          for (std::size_t i = 0; i < sel.size(); ++i) {
            const std::uint64_t seed = mix64(setting.seed ^ mix64(static_cast<std::uint64_t>(s))) + i;
            sel[i] = sample_gt_blocks(labels[i], setting.rand_gt_blocks, seed);
          }
          run_selection("rand-gt", sel, s);
        }

        for (std::size_t i = 0; i < sel.size(); ++i) sel[i] = labels[i].gt_blocks();
        run_selection("all-gt", sel, 0);

        // Full VAT anchor in the ablation style.
        try {
          const auto& abstracts = prepared.abstracts(setting.style, abstraction);
          const PromptBundle vat = build_prompt(task.question, prepared.originals(), PromptMode::VAT, abstracts);
          out.push_back(evaluator.evaluate_bundle(task, ablation_label(setting, "vat"), vat));
        } catch (const std::exception& e) {
          EvalRecord r;
          r.task_id = task.id;
          r.category = task.category;
          r.label = ablation_label(setting, "vat");
          r.mode = PromptMode::VAT;
          r.error = e.what();
          out.push_back(std::move(r));
        }
      },
      evaluator.options().cancel);

  RegionAblationResult result;
  result.setting = setting;
  for (auto& v : per_task) {
    for (auto& r : v) result.records.push_back(std::move(r));
  }
  for (auto level : kLevels) {
    const std::string label = ablation_label(setting, level);
    SelectionAccuracy acc{std::string(level), 0, 0.0};
    std::size_t correct = 0;
    for (const auto& r : result.records) {
      if (r.label != label) continue;
      ++acc.n;
      correct += r.correct ? 1 : 0;
    }
    if (acc.n > 0) acc.accuracy = static_cast<double>(correct) / static_cast<double>(acc.n);
    result.levels.push_back(acc);
  }
  return result;
}

double answer_logprob(const ModelResponse& response, std::string_view answer) {
  if (!response.logprobs) throw LogprobsUnsupported("response carries no log-probabilities");
  const std::string_view want = trim(answer);
  for (const auto& t : *response.logprobs) {
    if (trim(t.token) == want) return t.logprob;
  }
  for (const auto& t : *response.logprobs) {
    for (const auto& alt : t.alternatives) {
      if (trim(alt.token) == want) return alt.logprob;
    }
  }
  return kLogprobFloor;
}

TrendCurve run_logprob_trend(Evaluator& evaluator, const TaskInstance& task, const RevealOrder& order,
                             const AblationSetting& setting) {
  Gateway& gateway = evaluator.gateway();
  if (!gateway.config().request_logprobs) {
    throw LogprobsUnsupported("logprob trends need a model config with logprobs enabled");
  }
  if (!gateway.logprobs_available()) {
    throw LogprobsUnsupported("backend '" + gateway.backend().identity() + "' does not return log-probabilities");
  }
  if (setting.kind == AblationKind::WhiteMask) {
    throw std::invalid_argument("logprob trends use the present-on-blank or transition settings");
  }
  if (task.images.size() != 1) throw std::invalid_argument("logprob trends need a single-image task");

  PreparedTask prepared(task);
  const auto& originals = prepared.originals();
  const GridSpec grid = ablation_grid(task, originals[0]->image, setting);
  const BlockLabels labels = ablation_labels(task, 0, grid);
  if (order.sequence.size() != grid.size()) {
    throw std::invalid_argument("reveal order does not cover the grid");
  }
  const std::string answer = answer_token(task.ground_truth);
  const AbstractionConfig& abstraction = evaluator.options().abstraction;

  TrendCurve curve;
  curve.task_id = task.id;
  curve.order = std::string(to_string(order.strategy));
  curve.seed = order.seed;
  curve.sequence = order.sequence;

  for (std::size_t t = 0; t <= order.sequence.size(); ++t) {
    const std::vector<std::vector<std::size_t>> selected{
        std::vector<std::size_t>(order.sequence.begin(), order.sequence.begin() + static_cast<std::ptrdiff_t>(t))};
    const PromptBundle bundle = build_ablation_prompt(prepared, setting, abstraction, selected);
    curve.points.emplace_back(static_cast<int>(t), answer_logprob(gateway.send(bundle), answer));
  }

  // Anchors: the plain dual-image prompts at both ends of the reveal.
  const std::size_t n = originals.size();
  auto annotate_seconds = [&](PromptBundle& bundle, std::span<const std::size_t> shown) {
    std::size_t seen = 0;
    for (auto& part : bundle.parts) {
      if (auto* img = std::get_if<ImagePart>(&part)) {
        if (seen++ >= n) img->annotations = block_annotations(labels, shown);
      }
    }
  };
  const auto all = labels.gt_blocks().size() + labels.non_gt_blocks().size();
  std::vector<std::size_t> every(all);
  for (std::size_t b = 0; b < all; ++b) every[b] = b;

  PromptBundle empty = build_prompt(task.question, originals,
                                    setting.kind == AblationKind::PresentOnBlank ? PromptMode::VATwithBlank
                                                                                 : PromptMode::VATwithImgRepeat);
  annotate_seconds(empty, {});
  curve.anchor_empty = answer_logprob(gateway.send(empty), answer);

  PromptBundle full = build_prompt(task.question, originals, PromptMode::VAT,
                                   prepared.abstracts(setting.style, abstraction));
  annotate_seconds(full, every);
  curve.anchor_full = answer_logprob(gateway.send(full), answer);
  return curve;
}

TrendCurve run_logprob_trend(Evaluator& evaluator, const TaskInstance& task, RevealStrategy strategy,
                             const AblationSetting& setting) {
  PreparedTask prepared(task);
  if (task.images.empty()) throw std::invalid_argument("task has no images");
  const GridSpec grid = ablation_grid(task, prepared.originals()[0]->image, setting);
  const RevealOrder order = reveal_schedule(ablation_labels(task, 0, grid), strategy, setting.seed);
  return run_logprob_trend(evaluator, task, order, setting);
}

std::vector<CurveRow> to_curve_rows(std::span<const TrendCurve> curves) {
  std::vector<CurveRow> rows;
  for (const auto& c : curves) {
    for (const auto& [t, metric] : c.points) rows.push_back({c.task_id, t, metric, c.order});
  }
  return rows;
}

std::span<const PromptMode> format_sweep_modes() noexcept {
  static constexpr std::array kModes{PromptMode::BlankSingle,  PromptMode::ImgOnly,
                                     PromptMode::AbstractOnly, PromptMode::VATwithBlank,
                                     PromptMode::VATwithImgRepeat, PromptMode::VAT};
  return kModes;
}

namespace {

std::string column_name(PromptMode mode) {
  switch (mode) {
    case PromptMode::BlankSingle: return "Blank";
    case PromptMode::ImgOnly: return "Img";
    case PromptMode::AbstractOnly: return "Vis.Abs";
    case PromptMode::VATwithBlank: return "VAT w/ Blank";
    case PromptMode::VATwithImgRepeat: return "VAT w/ Img";
    case PromptMode::VAT: return "VAT";
    default: return std::string(to_string(mode));
  }
}

}  // namespace

std::string FormatSweepResult::to_markdown() const {
  std::ostringstream md;
  md << "|";
  for (const auto& [mode, acc] : columns) md << " " << column_name(mode) << " |";
  md << "\n|";
  for (std::size_t i = 0; i < columns.size(); ++i) md << "---:|";
  md << "\n|";
  for (const auto& [mode, acc] : columns) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", acc);
    md << " " << buf << " |";
  }
  md << "\n";
  return md.str();
}

FormatSweepResult run_format_sweep(Gateway& gateway, const EvalOptions& options, std::span<const TaskInstance> tasks,
                                   std::span<const PromptMode> modes) {
  EvalOptions opts = options;
  opts.modes.assign(modes.begin(), modes.end());
  Evaluator evaluator(gateway, opts);
  FormatSweepResult result;
  result.records = evaluator.run(tasks);
  for (auto mode : modes) {
    std::vector<EvalRecord> of_mode;
    for (const auto& r : result.records) {
      if (r.mode == mode) of_mode.push_back(r);
    }
    result.columns.emplace_back(mode, accuracy(of_mode));
  }
  return result;
}

}  // namespace vat
