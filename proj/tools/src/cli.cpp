// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "vat/ablation.hpp"
#include "vat/digest.hpp"
#include "vat/error.hpp"
#include "vat/harness.hpp"
#include "vat/react.hpp"
#include "vat/region.hpp"
#include "vat/response_cache.hpp"
#include "vat/sketcher_client.hpp"

namespace vat::cli {

namespace {

/// Bad arguments discovered after parsing; reported with the subcommand help.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto next = s.find(sep, pos);
    std::string item(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (!item.empty()) out.push_back(item);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<PromptMode> parse_modes(const std::string& text) {
  std::vector<PromptMode> modes;
  for (const auto& name : split(text, ',')) {
    auto m = parse_mode(name);
    if (!m) throw UsageError("unknown mode '" + name + "'");
    modes.push_back(*m);
  }
  if (modes.empty()) throw UsageError("no modes given");
  return modes;
}

StyleChoice parse_style_choice(const std::string& text) {
  StyleChoice choice;
  if (text == "auto") {
    choice.auto_select = true;
    return choice;
  }
  choice.styles.clear();
  for (const auto& name : split(text, ',')) {
    auto s = parse_style(name);
    if (!s) throw UsageError("unknown style '" + name + "'");
    choice.styles.push_back(*s);
  }
  if (choice.styles.empty()) throw UsageError("no style given");
  return choice;
}

std::pair<int, int> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    const int rows = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("");
    const int cols = std::stoi(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument("");
    if (rows < 1 || cols < 1) throw std::invalid_argument("");
    return {rows, cols};
  } catch (const std::logic_error&) {
    throw UsageError("grid must look like 3x3, got '" + text + "'");
  }
}

std::vector<BoundingBox> parse_boxes(const std::string& text) {
  std::vector<BoundingBox> boxes;
  for (const auto& item : split(text, ';')) {
    const auto v = split(item, ',');
    if (v.size() != 4) throw UsageError("boxes are x0,y0,x1,y1 separated by ';'");
    try {
      boxes.push_back({std::stoi(v[0]), std::stoi(v[1]), std::stoi(v[2]), std::stoi(v[3])});
    } catch (const std::logic_error&) {
      throw UsageError("malformed box '" + item + "'");
    }
  }
  return boxes;
}

/// Options shared by every subcommand that talks to a model.
struct BackendArgs {
  std::string backend;
  bool live = false;
  bool dry_run = false;
  std::optional<double> temperature;
  std::optional<std::uint64_t> seed;
  std::string cache_dir;
  bool no_cache = false;
  std::size_t parallelism = 4;
  double rpm = 0.0;
  std::string sketcher;
  std::string prices;
  std::string price_model;

  void add_to(CLI::App& app) {
    app.add_option("--backend", backend, "mock:<script.yaml> or live:<config.yaml>")->required();
    app.add_flag("--live", live, "Allow calls to a live (paid) backend");
    app.add_flag("--dry-run", dry_run, "Print request counts and worst-case cost, then exit");
    app.add_option("--temperature", temperature, "Override the sampling temperature");
    app.add_option("--seed", seed, "Seed for every random choice of the run");
    app.add_option("--cache-dir", cache_dir, "Response cache directory (temperature 0 only)");
    app.add_flag("--no-cache", no_cache, "Disable the response cache");
    app.add_option("--parallelism", parallelism, "Concurrent tasks and backend calls")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
    app.add_option("--rpm", rpm, "Requests per minute limit (0 = unlimited)")->check(CLI::NonNegativeNumber);
    app.add_option("--sketcher", sketcher, "Base URL of a sketch sidecar for neural styles");
    app.add_option("--prices", prices, "Price table (YAML or JSON)")->check(CLI::ExistingFile);
    app.add_option("--price-model", price_model, "Price table entry to charge (default: backend model)");
  }

  ModelConfig model_config() const {
    ModelConfig config;
    try {
      config = load_backend_spec(backend);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    if (temperature) config.temperature = *temperature;
    if (auto* mock = std::get_if<MockBackendConfig>(&config.backend)) {
      if (!std::filesystem::is_regular_file(mock->script_path)) {
        throw UsageError("mock script not found: " + mock->script_path.string());
      }
      if (seed) mock->seed = *seed;
    }
    if (auto* l = std::get_if<LiveBackendConfig>(&config.backend)) {
      if (!live && !dry_run) throw UsageError("live backends need --live (try --dry-run first)");
      if (!dry_run && std::getenv(l->api_key_env.c_str()) == nullptr) {
        throw UsageError("environment variable " + l->api_key_env + " is not set");
      }
    }
    try {
      config.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    return config;
  }

  GatewayOptions gateway_options() const {
    GatewayOptions o;
    if (!cache_dir.empty()) o.cache_dir = cache_dir;
    o.cache_enabled = !no_cache;
    o.parallelism = parallelism;
    o.requests_per_minute = rpm;
    return o;
  }

  std::shared_ptr<const PriceTable> price_table() const {
    if (prices.empty()) return nullptr;
    return std::make_shared<const PriceTable>(PriceTable::load(prices));
  }

  AbstractionConfig abstraction() const {
    AbstractionConfig a;
    if (!sketcher.empty()) a.sketcher = std::make_shared<HttpSketchClient>(sketcher);
    return a;
  }
};

std::size_t images_sent(PromptMode mode, std::size_t n, std::size_t styles) {
  switch (mode) {
    case PromptMode::VAT:
    case PromptMode::VATCoT: return n * (1 + styles);
    case PromptMode::VATwithBlank:
    case PromptMode::VATwithImgRepeat: return 2 * n;
    default: return n;
  }
}

struct Estimate {
  std::size_t requests = 0;
  TokenUsage worst;
};

/// Upper-bound usage: text at 4 chars per token, a flat 85 tokens per image,
/// and max_output_tokens of output for every request.
void add_estimate(Estimate& e, const TaskInstance& task, PromptMode mode, std::size_t styles,
                  const ModelConfig& config, std::size_t repeats = 1) {
  const auto text = task.question.size() + render_instruction(mode).size();
  const auto input = static_cast<std::int64_t>((text + 3) / 4 + 85 * images_sent(mode, task.images.size(), styles));
  e.requests += repeats;
  e.worst.input_tokens += input * static_cast<std::int64_t>(repeats);
  e.worst.output_tokens += static_cast<std::int64_t>(config.max_output_tokens) * static_cast<std::int64_t>(repeats);
}

void print_estimate(std::ostream& out, const Estimate& e, const BackendArgs& args, const ModelConfig& config) {
  out << "estimate: " << e.requests << " requests, at most " << e.worst.input_tokens << " input and "
      << e.worst.output_tokens << " output tokens\n";
  if (auto prices = args.price_table()) {
    const std::string model = args.price_model.empty() ? config.model_name() : args.price_model;
    out << "estimate: worst-case cost " << compute_cost(e.worst, *prices, model).to_string() << " (" << model
        << ")\n";
  } else {
    out << "estimate: no price table given, cost unknown\n";
  }
}

std::vector<TaskInstance> load_tasks(const std::string& manifest, const std::string& only) {
  auto tasks = load_manifest(manifest);
  if (!only.empty()) {
    const auto ids = split(only, ',');
    std::erase_if(tasks, [&](const TaskInstance& t) { return std::find(ids.begin(), ids.end(), t.id) == ids.end(); });
  }
  return tasks;
}

/// Starts a fresh run log in `dir`.
std::unique_ptr<RunLog> open_log(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / name);
  return std::make_unique<RunLog>(dir / name);
}

int finish(std::ostream& out, std::ostream& err, const RunReport& report, const std::filesystem::path& dir,
           std::span<const EvalRecord> records, std::atomic<bool>* cancel) {
  const auto paths = emit_report(report, dir);
  out << report.to_markdown();
  out << "wrote " << paths.json.string() << " and " << paths.markdown.string() << "\n";
  std::size_t errors = 0;
  for (const auto& r : records) errors += r.error ? 1 : 0;
  if (cancel && cancel->load()) {
    err << "interrupted; the run log holds the completed records\n";
    return kInterrupted;
  }
  if (errors > 0) {
    err << errors << " record(s) failed; see the run log\n";
    return kEvalErrors;
  }
  return kOk;
}

// ---------------------------------------------------------------- abstract

struct AbstractCmd {
  std::string style = "canny";
  double sigma = CannyParams{}.sigma;
  double low = CannyParams{}.low_ratio;
  double high = CannyParams{}.high_ratio;
  std::string polarity = "dark-on-white";
  std::string sketcher;
  std::string input;
  std::string output;

  void add_to(CLI::App& app) {
    app.add_option("--style", style, "canny, binary, photosketch, contour, anime, opensketch");
    app.add_option("--sigma", sigma, "Gaussian sigma for canny");
    app.add_option("--low", low, "Low hysteresis threshold as a fraction of the peak gradient");
    app.add_option("--high", high, "High hysteresis threshold as a fraction of the peak gradient");
    app.add_option("--polarity", polarity, "dark-on-white or light-on-black");
    app.add_option("--sketcher", sketcher, "Sketch sidecar URL for neural styles");
    app.add_option("input", input, "Input PNG or JPEG")->required()->check(CLI::ExistingFile);
    app.add_option("output", output, "Output PNG")->required();
  }

  int run(std::ostream& out) const {
    const auto s = parse_style(style);
    if (!s) throw UsageError("unknown style '" + style + "'");
    const auto p = parse_polarity(polarity);
    if (!p) throw UsageError("unknown polarity '" + polarity + "'");
    AbstractionConfig config;
    config.canny = CannyParams{sigma, low, high, *p};
    config.binary_polarity = *p;
    try {
      config.canny.validate();
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    if (!sketcher.empty()) config.sketcher = std::make_shared<HttpSketchClient>(sketcher);
    const VisualAbstract a = abstract_image(load_image(input), *s, config);
    save_png(a.image, output);
    out << output << " " << a.image.width() << "x" << a.image.height() << " " << to_string(a.style) << " "
        << image_digest(a.image) << "\n";
    return kOk;
  }
};

// -------------------------------------------------------------------- eval

struct EvalCmd {
  std::string manifest;
  std::string modes = "standard,vat";
  std::string style = "opensketch";
  std::string out_dir = "vat-out";
  std::string baseline;
  std::string only;
  bool no_count_cached = false;
  int pass_k = 0;
  std::string pass_mode = "vat";
  BackendArgs backend;

  void add_to(CLI::App& app) {
    app.add_option("--manifest", manifest, "Task manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    app.add_option("--modes", modes, "Comma-separated prompt modes");
    app.add_option("--style", style, "Abstract style(s), comma-separated, or 'auto'");
    app.add_option("--out", out_dir, "Output directory for run log and reports");
    app.add_option("--baseline", baseline, "Label the gains are measured against (default: first mode)");
    app.add_option("--tasks", only, "Only these task ids (comma-separated)");
    app.add_flag("--no-count-cached", no_count_cached, "Leave cache hits out of token and cost totals");
    app.add_option("--pass-at-k", pass_k, "Also sample k uncached answers per task")->check(CLI::Range(0, 1000));
    app.add_option("--pass-mode", pass_mode, "Prompt mode used for pass@k");
    backend.add_to(app);
  }

  int run(std::ostream& out, std::ostream& err, std::atomic<bool>* cancel) const {
    const auto mode_list = parse_modes(modes);
    const StyleChoice styles = parse_style_choice(style);
    const auto pass_m = parse_mode(pass_mode);
    if (!pass_m) throw UsageError("unknown pass mode '" + pass_mode + "'");
    ModelConfig config = backend.model_config();
    const auto tasks = load_tasks(manifest, only);
    if (tasks.empty()) throw UsageError("no tasks selected");
    if (styles.auto_select) {
      for (const auto& t : tasks) {
        if (t.category.empty()) throw UsageError("--style auto needs a category on every task ('" + t.id + "')");
      }
    }

    const std::size_t style_count = styles.auto_select ? 1 : styles.styles.size();
    Estimate estimate;
    for (const auto& t : tasks) {
      for (auto m : mode_list) add_estimate(estimate, t, m, style_count, config);
      if (pass_k > 0) add_estimate(estimate, t, *pass_m, style_count, config, static_cast<std::size_t>(pass_k));
    }
    if (backend.dry_run || config.is_live()) print_estimate(out, estimate, backend, config);
    if (backend.dry_run) return kOk;

    auto gateway = Gateway::create(config, backend.gateway_options());
    const std::filesystem::path dir = out_dir;
    auto log = open_log(dir, "run.jsonl");

    EvalOptions opts;
    opts.modes = mode_list;
    opts.styles = styles;
    opts.abstraction = backend.abstraction();
    opts.prices = backend.price_table();
    opts.price_model = backend.price_model;
    opts.parallelism = backend.parallelism;
    opts.cancel = cancel;
    opts.on_record = [&](const EvalRecord& r) { log->append(r); };
    Evaluator evaluator(*gateway, opts);

    std::vector<EvalRecord> records = evaluator.run(tasks);
    if (pass_k > 0 && !(cancel && cancel->load())) {
      auto trials = evaluator.run_pass_at_k(tasks, *pass_m, pass_k);
      records.insert(records.end(), trials.begin(), trials.end());
    }
    log->flush();

    SummaryOptions summary;
    summary.baseline = baseline.empty() ? variant_label(mode_list.front(), styles) : baseline;
    summary.count_cached = !no_count_cached;
    return finish(out, err, summarize(records, summary), dir, records, cancel);
  }
};

// ------------------------------------------------------------------ ablate

struct AblateCmd {
  std::string manifest;
  std::string kind = "present-on-blank";
  std::string grid = "3x3";
  std::string style = "opensketch";
  std::string out_dir = "vat-ablate";
  std::string trend;
  std::string only;
  int rand_gt_seeds = 1;
  std::size_t rand_gt_blocks = 1;
  BackendArgs backend;

  void add_to(CLI::App& app) {
    app.add_option("--manifest", manifest, "Task manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    app.add_option("--kind", kind, "present-on-blank, transition, white-mask, or format-sweep");
    app.add_option("--grid", grid, "Grid when a task has no grid_hint, e.g. 3x3");
    app.add_option("--style", style, "Abstract style");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--trend", trend, "Log-prob reveal curves for these orders (gt-first,redundancy-first,random)");
    app.add_option("--tasks", only, "Only these task ids (comma-separated)");
    app.add_option("--rand-gt-seeds", rand_gt_seeds, "Rand-GT draws per task")->check(CLI::Range(1, 10000));
    app.add_option("--rand-gt-blocks", rand_gt_blocks, "GT blocks kept per Rand-GT draw")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
    backend.add_to(app);
  }

  int run(std::ostream& out, std::ostream& err, std::atomic<bool>* cancel) const {
    const auto [rows, cols] = parse_grid(grid);
    const auto s = parse_style(style);
    if (!s) throw UsageError("unknown style '" + style + "'");
    const bool sweep = kind == "format-sweep";
    const auto k = parse_ablation_kind(kind);
    if (!sweep && !k) throw UsageError("unknown ablation kind '" + kind + "'");
    std::vector<RevealStrategy> orders;
    for (const auto& name : split(trend, ',')) {
      auto o = parse_reveal_strategy(name);
      if (!o) throw UsageError("unknown reveal order '" + name + "'");
      orders.push_back(*o);
    }
    if (!orders.empty() && (sweep || *k == AblationKind::WhiteMask)) {
      throw UsageError("--trend works with present-on-blank and transition");
    }

    ModelConfig config = backend.model_config();
    if (!orders.empty()) {
      config.request_logprobs = true;
      config.top_logprobs = std::max(config.top_logprobs, 5);
    }
    const auto tasks = load_tasks(manifest, only);
    if (tasks.empty()) throw UsageError("no tasks selected");

    AblationSetting setting;
    if (k) setting.kind = *k;
    setting.rows = rows;
    setting.cols = cols;
    setting.seed = backend.seed.value_or(0);
    setting.rand_gt_seeds = rand_gt_seeds;
    setting.rand_gt_blocks = rand_gt_blocks;
    setting.style = *s;

    Estimate estimate;
    for (const auto& t : tasks) {
      if (sweep) {
        for (auto m : format_sweep_modes()) add_estimate(estimate, t, m, 1, config);
      } else if (!orders.empty()) {
        const std::size_t n = t.grid_hint ? static_cast<std::size_t>(t.grid_hint->rows * t.grid_hint->cols)
                                          : static_cast<std::size_t>(rows * cols);
        add_estimate(estimate, t, PromptMode::VAT, 1, config, orders.size() * (n + 1) + 2);
      } else {
        add_estimate(estimate, t, PromptMode::VAT, 1, config, 4 + static_cast<std::size_t>(rand_gt_seeds));
      }
    }
    if (backend.dry_run || config.is_live()) print_estimate(out, estimate, backend, config);
    if (backend.dry_run) return kOk;

    auto gateway = Gateway::create(config, backend.gateway_options());
    const std::filesystem::path dir = out_dir;
    auto log = open_log(dir, "run.jsonl");
    EvalOptions opts;
    opts.styles.styles = {*s};
    opts.abstraction = backend.abstraction();
    opts.prices = backend.price_table();
    opts.price_model = backend.price_model;
    opts.parallelism = backend.parallelism;
    opts.cancel = cancel;
    opts.on_record = [&](const EvalRecord& r) { log->append(r); };

    std::vector<EvalRecord> records;
    SummaryOptions summary;
    RunReport report;
    if (sweep) {
      FormatSweepResult result = run_format_sweep(*gateway, opts, tasks);
      out << result.to_markdown() << "\n";
      records = std::move(result.records);
      summary.baseline = "img";
      report = summarize(records, summary);
    } else if (!orders.empty()) {
      Evaluator evaluator(*gateway, opts);
      std::vector<TrendCurve> curves(tasks.size() * orders.size());
      parallel_for(
          tasks.size(), backend.parallelism,
          [&](std::size_t i) {
            for (std::size_t o = 0; o < orders.size(); ++o) {
              curves[i * orders.size() + o] = run_logprob_trend(evaluator, tasks[i], orders[o], setting);
            }
          },
          cancel);
      std::erase_if(curves, [](const TrendCurve& c) { return c.points.empty(); });
      report.baseline = "";
      report.curves = to_curve_rows(curves);
      for (const auto& c : curves) {
        out << c.task_id << " " << c.order << ": t=0 " << c.points.front().second << ", t=" << c.points.back().first
            << " " << c.points.back().second << " (anchors " << c.anchor_empty << ", " << c.anchor_full << ")\n";
      }
    } else {
      Evaluator evaluator(*gateway, opts);
      RegionAblationResult result = run_region_ablation(evaluator, tasks, setting);
      out << "| Level | N | ACC |\n|---|---:|---:|\n";
      for (const auto& l : result.levels) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", l.accuracy);
        out << "| " << l.level << " | " << l.n << " | " << buf << " |\n";
      }
      out << "\n";
      for (const auto& r : result.records) log->append(r);
      records = std::move(result.records);
      summary.baseline = "ablate:" + std::string(to_string(setting.kind)) + ":img";
      report = summarize(records, summary);
    }
    log->flush();
    return finish(out, err, report, dir, records, cancel);
  }
};

// ------------------------------------------------------------------- react

struct ReactCmd {
  std::string manifest;
  std::string out_dir = "vat-react";
  std::string only;
  int max_steps = 5;
  BackendArgs backend;

  void add_to(CLI::App& app) {
    app.add_option("--manifest", manifest, "Task manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--tasks", only, "Only these task ids (comma-separated)");
    app.add_option("--max-steps", max_steps, "Model calls per episode")->check(CLI::Range(1, 100));
    backend.add_to(app);
  }

  int run(std::ostream& out, std::ostream& err, std::atomic<bool>* cancel) const {
    ModelConfig config = backend.model_config();
    const auto tasks = load_tasks(manifest, only);
    if (tasks.empty()) throw UsageError("no tasks selected");
    Estimate estimate;
    for (const auto& t : tasks) add_estimate(estimate, t, PromptMode::VAT, 1, config, static_cast<std::size_t>(max_steps));
    if (backend.dry_run || config.is_live()) print_estimate(out, estimate, backend, config);
    if (backend.dry_run) return kOk;

    auto gateway = Gateway::create(config, backend.gateway_options());
    const std::filesystem::path dir = out_dir;
    auto log = open_log(dir, "run.jsonl");
    std::filesystem::remove(dir / "react_trace.jsonl");
    std::ofstream trace(dir / "react_trace.jsonl", std::ios::binary);

    const auto prices = backend.price_table();
    const std::string price_model = backend.price_model.empty() ? config.model_name() : backend.price_model;
    if (prices) prices->at(price_model);
    ReactOptions ropts;
    ropts.max_steps = max_steps;
    ropts.abstraction = backend.abstraction();

    std::vector<std::optional<ReactEpisode>> episodes(tasks.size());
    std::vector<std::optional<EvalRecord>> slots(tasks.size());
    std::mutex mu;
    parallel_for(
        tasks.size(), backend.parallelism,
        [&](std::size_t i) {
          EvalRecord r;
          r.task_id = tasks[i].id;
          r.category = tasks[i].category;
          r.label = "react";
          r.mode = PromptMode::VAT;
          try {
            ReactEpisode ep = run_react(*gateway, tasks[i], ropts);
            r.response_text = ep.final.text;
            r.prediction = ep.prediction;
            r.correct = ep.correct;
            r.usage = ep.usage;
            r.latency_ms = ep.final.latency_ms;
            r.cached = ep.final.cached;
            if (prices) r.cost = compute_cost(ep.usage, *prices, price_model);
            std::lock_guard lock(mu);
            write_trace(ep, trace);
            trace.flush();
            episodes[i] = std::move(ep);
          } catch (const std::exception& e) {
            r.error = e.what();
          }
          log->append(r);
          slots[i] = std::move(r);
        },
        cancel);

    std::vector<EvalRecord> records;
    int invocations = 0;
    int truncated = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (slots[i]) records.push_back(*slots[i]);
      if (episodes[i]) {
        invocations += episodes[i]->tool_invocations;
        truncated += episodes[i]->truncated ? 1 : 0;
      }
    }
    out << "episodes: " << records.size() << ", tool invocations: " << invocations << ", truncated: " << truncated
        << "\n";
    SummaryOptions summary;
    summary.baseline = "react";
    return finish(out, err, summarize(records, summary), dir, records, cancel);
  }
};

// ------------------------------------------------------------------ report

struct ReportCmd {
  std::vector<std::string> logs;
  std::string out_dir;
  std::string baseline = "standard";
  std::string curves;
  bool no_count_cached = false;

  void add_to(CLI::App& app) {
    app.add_option("--run-log", logs, "Run log(s) to fold into one report")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--baseline", baseline, "Label the gains are measured against");
    app.add_option("--curves", curves, "Curve CSV to carry into the report")->check(CLI::ExistingFile);
    app.add_flag("--no-count-cached", no_count_cached, "Leave cache hits out of token and cost totals");
  }

  int run(std::ostream& out) const {
    std::vector<EvalRecord> records;
    for (const auto& path : logs) {
      auto part = RunLog::read(path);
      records.insert(records.end(), part.begin(), part.end());
    }
    SummaryOptions summary{baseline, !no_count_cached};
    RunReport report = summarize(records, summary);
    if (!curves.empty()) {
      std::istringstream in(read_file(curves));
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        // task_id may be quoted; the other three fields are plain.
        const auto c3 = line.rfind(',');
        const auto c2 = line.rfind(',', c3 - 1);
        const auto c1 = line.rfind(',', c2 - 1);
        if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos) {
          throw Error("malformed curve row: " + line);
        }
        std::string id = line.substr(0, c1);
        if (id.size() >= 2 && id.front() == '"') {
          std::string unq;
          for (std::size_t i = 1; i + 1 < id.size(); ++i) {
            if (id[i] == '"' && id[i + 1] == '"') ++i;
            unq += id[i];
          }
          id = unq;
        }
        report.curves.push_back({id, std::stoi(line.substr(c1 + 1, c2 - c1 - 1)),
                                 std::stod(line.substr(c2 + 1, c3 - c2 - 1)), line.substr(c3 + 1)});
      }
    }
    const auto paths = emit_report(report, out_dir);
    out << report.to_markdown();
    out << "wrote " << paths.json.string() << " and " << paths.markdown.string() << "\n";
    return kOk;
  }
};

// ------------------------------------------------------------------- cache

struct CacheCmd {
  std::string action;
  std::string dir;

  void add_to(CLI::App& app) {
    app.add_option("action", action, "stats or clear")->required()->check(CLI::IsMember({"stats", "clear"}));
    app.add_option("--cache-dir", dir, "Response cache directory")->required();
  }

  int run(std::ostream& out) const {
    if (action == "clear") {
      out << "removed " << ResponseCache::clear(dir) << " entries\n";
      return kOk;
    }
    const auto s = ResponseCache::scan(dir);
    out << "entries: " << s.entries << "\nbytes: " << s.bytes << "\ncorrupt: " << s.corrupt << "\n";
    return s.corrupt == 0 ? kOk : kEvalErrors;
  }
};

// --------------------------------------------------------- render-template

struct TemplateCmd {
  std::string name;

  void add_to(CLI::App& app) {
    app.add_option("name", name, "standard, cot, vat, vat-cot, or scaffold")->required();
  }

  int run(std::ostream& out) const {
    const auto kind = parse_template(name);
    if (!kind) throw UsageError("unknown template '" + name + "'");
    out << template_text(*kind);
    return kOk;
  }
};

// ---------------------------------------------------------- ablate-compose

struct ComposeCmd {
  std::string image;
  std::string style = "canny";
  std::string grid = "3x3";
  std::string boxes;
  std::string order = "gt-first";
  std::string kind = "present-on-blank";
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string sketcher;

  void add_to(CLI::App& app) {
    app.add_option("--image", image, "Input image")->required()->check(CLI::ExistingFile);
    app.add_option("--style", style, "Abstract style");
    app.add_option("--grid", grid, "Grid, e.g. 3x3");
    app.add_option("--boxes", boxes, "GT boxes: x0,y0,x1,y1;...");
    app.add_option("--order", order, "gt-first, redundancy-first, or random");
    app.add_option("--kind", kind, "present-on-blank or transition");
    app.add_option("--seed", seed, "Seed for the random order");
    app.add_option("--sketcher", sketcher, "Sketch sidecar URL for neural styles");
    app.add_option("--out", out_dir, "Directory for step_XX.png files")->required();
  }

  int run(std::ostream& out) const {
    const auto s = parse_style(style);
    if (!s) throw UsageError("unknown style '" + style + "'");
    const auto o = parse_reveal_strategy(order);
    if (!o) throw UsageError("unknown reveal order '" + order + "'");
    const auto k = parse_ablation_kind(kind);
    if (!k || *k == AblationKind::WhiteMask) throw UsageError("kind must be present-on-blank or transition");
    const auto [rows, cols] = parse_grid(grid);

    const RasterImage original = load_image(image);
    AbstractionConfig config;
    if (!sketcher.empty()) config.sketcher = std::make_shared<HttpSketchClient>(sketcher);
    const VisualAbstract a = abstract_image(original, *s, config);
    const GridSpec g = make_grid(original.width(), original.height(), rows, cols);
    const auto box_list = parse_boxes(boxes);
    for (const auto& b : box_list) {
      if (!b.valid_in(original)) throw UsageError("box outside the image");
    }
    const RevealOrder schedule = reveal_schedule(label_blocks(g, box_list), *o, seed);
    std::filesystem::create_directories(out_dir);
    for (std::size_t t = 0; t <= schedule.sequence.size(); ++t) {
      const std::span<const std::size_t> shown(schedule.sequence.data(), t);
      const RasterImage frame = *k == AblationKind::PresentOnBlank
                                    ? compose_present(blank_like(a.image), a, g, shown)
                                    : compose_transition(original, a, g, shown);
      char name[32];
      std::snprintf(name, sizeof name, "step_%02zu.png", t);
      save_png(frame, std::filesystem::path(out_dir) / name);
    }
    out << "wrote " << schedule.sequence.size() + 1 << " frames to " << out_dir << "\n";
    return kOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::atomic<bool>* cancel) {
  CLI::App app{"Visual abstract prompting toolkit", "vat"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vat 0.1.0");

  AbstractCmd abstract_cmd;
  EvalCmd eval_cmd;
  AblateCmd ablate_cmd;
  ReactCmd react_cmd;
  ReportCmd report_cmd;
  CacheCmd cache_cmd;
  TemplateCmd template_cmd;
  ComposeCmd compose_cmd;

  auto* abstract_app = app.add_subcommand("abstract", "Convert an image into a visual abstract");
  abstract_cmd.add_to(*abstract_app);
  auto* eval_app = app.add_subcommand("eval", "Evaluate prompt modes over a task manifest");
  eval_cmd.add_to(*eval_app);
  auto* ablate_app = app.add_subcommand("ablate", "Region, reveal-curve, and prompt-format ablations");
  ablate_cmd.add_to(*ablate_app);
  auto* react_app = app.add_subcommand("react", "Run the ReAct loop with the abstract tool");
  react_cmd.add_to(*react_app);
  auto* report_app = app.add_subcommand("report", "Rebuild reports from run logs");
  report_cmd.add_to(*report_app);
  auto* cache_app = app.add_subcommand("cache", "Inspect or clear a response cache");
  cache_cmd.add_to(*cache_app);
  auto* template_app = app.add_subcommand("render-template", "Print a prompt template");
  template_cmd.add_to(*template_app);
  auto* compose_app = app.add_subcommand("ablate-compose", "Dump the frames of a reveal schedule as PNGs");
  compose_cmd.add_to(*compose_app);

  auto active = [&]() -> CLI::App* {
    for (auto* sub : app.get_subcommands()) return sub;
    return &app;
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << active()->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "vat 0.1.0\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << active()->help();
    return kUsage;
  }

  CLI::App* sub = active();
  try {
    if (sub == abstract_app) return abstract_cmd.run(out);
    if (sub == eval_app) return eval_cmd.run(out, err, cancel);
    if (sub == ablate_app) return ablate_cmd.run(out, err, cancel);
    if (sub == react_app) return react_cmd.run(out, err, cancel);
    if (sub == report_app) return report_cmd.run(out);
    if (sub == cache_app) return cache_cmd.run(out);
    if (sub == template_app) return template_cmd.run(out);
    if (sub == compose_app) return compose_cmd.run(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kEvalErrors;
  }
  err << app.help();
  return kUsage;
}

}  // namespace vat::cli
