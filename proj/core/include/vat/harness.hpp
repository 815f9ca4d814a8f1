// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vat/abstraction.hpp"
#include "vat/gateway.hpp"
#include "vat/money.hpp"
#include "vat/prompt.hpp"
#include "vat/task.hpp"

namespace vat {

/// Reads a line-delimited manifest. Image paths are resolved against the
/// manifest's directory and must exist. Blank lines are skipped.
/// Throws SchemaError (1-based line), MissingImage, UnsupportedBenchmark.
std::vector<TaskInstance> load_manifest(const std::filesystem::path& path);
std::vector<TaskInstance> parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                                         bool check_images = true);
TaskInstance task_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json to_json(const TaskInstance& task, const std::filesystem::path& base_dir = {});

/// Text after the last "ANSWER:" marker (case-insensitive), reduced to the
/// bare answer; the trimmed input when no marker is present.
std::string extract_answer(std::string_view text);

/// Lowercase, collapse whitespace, strip enclosing punctuation.
std::string normalize_answer(std::string_view text);

/// Symmetric substring match on normalized strings. A single-letter ground
/// truth must appear as a standalone token of the prediction.
bool f_correct(std::string_view prediction, std::string_view ground_truth);

struct EvalRecord {
  std::string task_id;
  std::string category;
  std::string label;  // variant key, e.g. "standard" or "vat@opensketch"
  PromptMode mode = PromptMode::Standard;
  std::vector<std::string> styles;
  int trial = 0;  // pass@k sample index; 0 for ordinary runs
  std::string response_text;
  std::string prediction;
  bool correct = false;
  TokenUsage usage;
  double latency_ms = 0.0;
  Money cost;
  bool cached = false;
  std::string request_digest;
  std::optional<std::string> error;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

nlohmann::json to_json(const EvalRecord& r);
EvalRecord record_from_json(const nlohmann::json& j);

/// Mean correctness. Throws EmptyRun.
double accuracy(std::span<const EvalRecord> records);

/// Fraction of tasks with a correct answer among trials 0..k-1 for each k in
/// 1..max_k. Records are grouped by (label, task_id).
std::vector<double> pass_at_k_curve(std::span<const EvalRecord> trials, int max_k);

/// Appends records as JSON lines, flushing after each one.
class RunLog {
 public:
  explicit RunLog(const std::filesystem::path& path);
  void append(const EvalRecord& record);
  void flush();
  const std::filesystem::path& path() const noexcept { return path_; }

  static std::vector<EvalRecord> read(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

struct ModeSummary {
  std::string label;
  std::string mode;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::size_t errors = 0;
  double accuracy = 0.0;
  std::optional<double> gain;
  double mean_input_tokens = 0.0;
  double mean_output_tokens = 0.0;
  double mean_sum_tokens = 0.0;
  Money total_cost;

  friend bool operator==(const ModeSummary&, const ModeSummary&) = default;
};

struct PassAtKSummary {
  std::string label;
  std::size_t tasks = 0;
  std::vector<double> pass_at;  // index j holds pass@(j+1)
  friend bool operator==(const PassAtKSummary&, const PassAtKSummary&) = default;
};

struct CurveRow {
  std::string task_id;
  int t = 0;
  double metric = 0.0;
  std::string order;
  friend bool operator==(const CurveRow&, const CurveRow&) = default;
};

struct RunReport {
  std::string baseline;
  std::vector<ModeSummary> modes;
  std::vector<PassAtKSummary> pass_at_k;
  std::vector<CurveRow> curves;
  Money total_cost;

  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
  std::string to_markdown() const;
  std::string curves_csv() const;

  const ModeSummary* find(std::string_view label) const noexcept;
  friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct SummaryOptions {
  std::string baseline = "standard";
  /// Count tokens and cost of cache hits.
  bool count_cached = true;
};

/// Folds records into per-label summaries. Labels are ordered by prompt mode,
/// then label text, so the result does not depend on record order. Trial
/// records (trial > 0 or label ending "#pass") feed the pass@k table.
RunReport summarize(std::span<const EvalRecord> records, const SummaryOptions& options = {});

struct ReportPaths {
  std::filesystem::path json;
  std::filesystem::path markdown;
  std::optional<std::filesystem::path> curves_csv;
};

/// Writes `<dir>/report.json`, `<dir>/report.md`, and `<dir>/curves.csv` when
/// the report has curves.
ReportPaths emit_report(const RunReport& report, const std::filesystem::path& dir);

struct StyleChoice {
  bool auto_select = false;
  std::vector<AbstractStyle> styles{AbstractStyle::OpenSketch};

  std::vector<AbstractStyle> for_task(const TaskInstance& task) const;
  /// "opensketch", "canny+binary", or "auto".
  std::string label() const;
};

/// Record label for `mode` under `styles`.
std::string variant_label(PromptMode mode, const StyleChoice& styles);

/// A task with decoded images and memoized abstracts.
class PreparedTask {
 public:
  explicit PreparedTask(TaskInstance task);

  const TaskInstance& task() const noexcept { return task_; }
  const std::vector<std::shared_ptr<const EncodedImage>>& originals() const;
  /// Abstracts of every image in `style`, computed once.
  const std::vector<VisualAbstract>& abstracts(AbstractStyle style, const AbstractionConfig& config);

 private:
  TaskInstance task_;
  mutable std::once_flag load_once_;
  mutable std::vector<std::shared_ptr<const EncodedImage>> originals_;
  std::mutex mu_;
  std::map<AbstractStyle, std::vector<VisualAbstract>> abstracts_;
};

struct EvalOptions {
  std::vector<PromptMode> modes{PromptMode::Standard, PromptMode::VAT};
  StyleChoice styles;
  AbstractionConfig abstraction;
  std::shared_ptr<const PriceTable> prices;  // costs are zero without one
  std::string price_model;                   // defaults to the backend's model name
  std::size_t parallelism = 4;
  std::atomic<bool>* cancel = nullptr;
  std::function<void(const EvalRecord&)> on_record;
};

class Evaluator {
 public:
  Evaluator(Gateway& gateway, EvalOptions options);

  /// Evaluates every (task, mode) pair. Records come back ordered by task,
  /// then by mode, whatever the completion order was. Per-task failures are
  /// recorded in EvalRecord::error and do not abort the run.
  std::vector<EvalRecord> run(std::span<const TaskInstance> tasks);

  /// One (task, mode) evaluation.
  EvalRecord evaluate(PreparedTask& task, PromptMode mode, SendOptions send = {}, int trial = 0);

  /// Sends a caller-built bundle and scores it under `label`.
  EvalRecord evaluate_bundle(const TaskInstance& task, std::string label, const PromptBundle& bundle,
                             SendOptions send = {}, int trial = 0);

  /// Scores a raw response against `task`; fills prediction, correct, cost.
  EvalRecord score(const TaskInstance& task, std::string label, PromptMode mode,
                   const ModelResponse& response) const;

  /// k independent uncached sends of `mode`; true iff any is correct.
  /// Trial records (trial = 0..k-1) are appended to `trials`.
  bool pass_at_k(PreparedTask& task, PromptMode mode, int k, std::vector<EvalRecord>& trials);

  /// pass_at_k over all tasks in parallel; returns every trial record.
  std::vector<EvalRecord> run_pass_at_k(std::span<const TaskInstance> tasks, PromptMode mode, int k);

  Gateway& gateway() noexcept { return gateway_; }
  const EvalOptions& options() const noexcept { return options_; }
  Money cost_of(const TokenUsage& usage) const;
  PromptBundle build(PreparedTask& task, PromptMode mode);

 private:
  Gateway& gateway_;
  EvalOptions options_;
};

/// Runs `fn(i)` for i in [0, n) on up to `parallelism` threads.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn,
                  std::atomic<bool>* cancel = nullptr);

}  // namespace vat
