// SPDX-License-Identifier: Apache-2.0

#include <thread>

#include "vat/error.hpp"
#include "vat/harness.hpp"

namespace vat {

void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn,
                  std::atomic<bool>* cancel) {
  if (n == 0) return;
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      if (cancel && cancel->load()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<AbstractStyle> StyleChoice::for_task(const TaskInstance& task) const {
  if (auto_select) return {select_style(task.category)};
  return styles;
}

std::string StyleChoice::label() const {
  if (auto_select) return "auto";
  std::string out;
  for (auto s : styles) {
    if (!out.empty()) out += '+';
    out += to_string(s);
  }
  return out;
}

std::string variant_label(PromptMode mode, const StyleChoice& styles) {
  std::string label(to_string(mode));
  if (requires_abstracts(mode)) label += "@" + styles.label();
  return label;
}

PreparedTask::PreparedTask(TaskInstance task) : task_(std::move(task)) {}

const std::vector<std::shared_ptr<const EncodedImage>>& PreparedTask::originals() const {
  std::call_once(load_once_, [&] {
    std::vector<std::shared_ptr<const EncodedImage>> images;
    for (const auto& p : task_.images) {
      if (!std::filesystem::is_regular_file(p)) throw MissingImage("image not found: " + p.string());
      images.push_back(encode_for_prompt(load_image(p)));
    }
    originals_ = std::move(images);
  });
  return originals_;
}

const std::vector<VisualAbstract>& PreparedTask::abstracts(AbstractStyle style, const AbstractionConfig& config) {
  const auto& originals = this->originals();
  std::lock_guard lock(mu_);
  auto it = abstracts_.find(style);
  if (it != abstracts_.end()) return it->second;
  std::vector<VisualAbstract> out;
  out.reserve(originals.size());
  for (const auto& img : originals) out.push_back(abstract_image(img->image, style, config));
  return abstracts_.emplace(style, std::move(out)).first->second;
}

Evaluator::Evaluator(Gateway& gateway, EvalOptions options) : gateway_(gateway), options_(std::move(options)) {
  if (options_.price_model.empty()) options_.price_model = gateway_.config().model_name();
  if (options_.prices) options_.prices->at(options_.price_model);  // UnknownModel up front
  if (options_.modes.empty()) throw ConfigError("no prompt modes selected");
  if (!options_.styles.auto_select && options_.styles.styles.empty()) {
    for (auto m : options_.modes) {
      if (requires_abstracts(m)) throw ConfigError("mode '" + std::string(to_string(m)) + "' needs a style");
    }
  }
}

Money Evaluator::cost_of(const TokenUsage& usage) const {
  if (!options_.prices) return {};
  return compute_cost(usage, *options_.prices, options_.price_model);
}

PromptBundle Evaluator::build(PreparedTask& task, PromptMode mode) {
  const auto& originals = task.originals();
  if (!requires_abstracts(mode)) return build_prompt(task.task().question, originals, mode);
  std::vector<VisualAbstract> abstracts;
  for (auto style : options_.styles.for_task(task.task())) {
    const auto& a = task.abstracts(style, options_.abstraction);
    abstracts.insert(abstracts.end(), a.begin(), a.end());
  }
  return build_prompt(task.task().question, originals, mode, abstracts);
}

EvalRecord Evaluator::score(const TaskInstance& task, std::string label, PromptMode mode,
                            const ModelResponse& response) const {
  EvalRecord r;
  r.task_id = task.id;
  r.category = task.category;
  r.label = std::move(label);
  r.mode = mode;
  r.response_text = response.text;
  r.prediction = extract_answer(response.text);
  r.correct = f_correct(r.prediction, task.ground_truth);
  r.usage = response.usage;
  r.latency_ms = response.latency_ms;
  r.cost = cost_of(response.usage);
  r.cached = response.cached;
  return r;
}

namespace {

EvalRecord failed_record(const TaskInstance& task, std::string label, PromptMode mode,
                         std::vector<std::string> styles, int trial, const std::exception& e) {
  EvalRecord r;
  r.task_id = task.id;
  r.category = task.category;
  r.label = std::move(label);
  r.mode = mode;
  r.styles = std::move(styles);
  r.trial = trial;
  r.error = e.what();
  return r;
}

std::vector<std::string> style_names(const PromptBundle& bundle) {
  std::vector<std::string> out;
  for (auto s : bundle.abstract_styles) out.emplace_back(to_string(s));
  return out;
}

}  // namespace

EvalRecord Evaluator::evaluate_bundle(const TaskInstance& task, std::string label, const PromptBundle& bundle,
                                      SendOptions send, int trial) {
  try {
    const ModelResponse response = gateway_.send(bundle, send);
    EvalRecord r = score(task, std::move(label), bundle.mode, response);
    r.styles = style_names(bundle);
    r.trial = trial;
    r.request_digest = gateway_.key_for(ChatRequest::from_bundle(bundle));
    return r;
  } catch (const std::exception& e) {
    return failed_record(task, std::move(label), bundle.mode, style_names(bundle), trial, e);
  }
}

EvalRecord Evaluator::evaluate(PreparedTask& task, PromptMode mode, SendOptions send, int trial) {
  std::string label = variant_label(mode, options_.styles);
  PromptBundle bundle;
  try {
    bundle = build(task, mode);
  } catch (const std::exception& e) {
    return failed_record(task.task(), std::move(label), mode, {}, trial, e);
  }
  return evaluate_bundle(task.task(), std::move(label), bundle, send, trial);
}

std::vector<EvalRecord> Evaluator::run(std::span<const TaskInstance> tasks) {
  const std::size_t m = options_.modes.size();
  std::vector<std::optional<EvalRecord>> slots(tasks.size() * m);
  std::mutex emit_mu;
  parallel_for(
      tasks.size(), options_.parallelism,
      [&](std::size_t i) {
        PreparedTask prepared(tasks[i]);
        for (std::size_t j = 0; j < m; ++j) {
          if (options_.cancel && options_.cancel->load()) return;
          EvalRecord r = evaluate(prepared, options_.modes[j]);
          if (options_.on_record) {
            std::lock_guard lock(emit_mu);
            options_.on_record(r);
          }
          slots[i * m + j] = std::move(r);
        }
      },
      options_.cancel);
  std::vector<EvalRecord> out;
  out.reserve(slots.size());
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

bool Evaluator::pass_at_k(PreparedTask& task, PromptMode mode, int k, std::vector<EvalRecord>& trials) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  bool any = false;
  for (int t = 0; t < k; ++t) {
    const SendOptions send{.use_cache = false, .sample_tag = task.task().id + "#" + std::to_string(t)};
    EvalRecord r = evaluate(task, mode, send, t);
    r.label += "#pass";
    const bool failed = r.error.has_value();
    any = any || r.correct;
    trials.push_back(std::move(r));
    if (failed) break;  // the task is aborted, the run continues
  }
  return any;
}

std::vector<EvalRecord> Evaluator::run_pass_at_k(std::span<const TaskInstance> tasks, PromptMode mode, int k) {
  std::vector<std::vector<EvalRecord>> per_task(tasks.size());
  std::mutex emit_mu;
  parallel_for(
      tasks.size(), options_.parallelism,
      [&](std::size_t i) {
        PreparedTask prepared(tasks[i]);
        pass_at_k(prepared, mode, k, per_task[i]);
        if (options_.on_record) {
          std::lock_guard lock(emit_mu);
          for (const auto& r : per_task[i]) options_.on_record(r);
        }
      },
      options_.cancel);
  std::vector<EvalRecord> out;
  for (auto& v : per_task) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace vat
