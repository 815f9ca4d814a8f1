// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "vat/error.hpp"
#include "vat/harness.hpp"

namespace vat {

namespace {

constexpr std::string_view kPassSuffix = "#pass";

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits, bool sign = false) {
  char buf[64];
  std::snprintf(buf, sizeof buf, sign ? "%+.*f" : "%.*f", digits, v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int mode_rank(std::string_view mode) {
  auto m = parse_mode(mode);
  return m ? static_cast<int>(*m) : 1000;
}

bool is_pass_label(std::string_view label) {
  return label.size() >= kPassSuffix.size() && label.substr(label.size() - kPassSuffix.size()) == kPassSuffix;
}

}  // namespace

nlohmann::json to_json(const EvalRecord& r) {
  nlohmann::json j{{"task_id", r.task_id},
                   {"category", r.category},
                   {"label", r.label},
                   {"mode", std::string(to_string(r.mode))},
                   {"styles", r.styles},
                   {"trial", r.trial},
                   {"response_text", r.response_text},
                   {"prediction", r.prediction},
                   {"correct", r.correct},
                   {"input_tokens", r.usage.input_tokens},
                   {"output_tokens", r.usage.output_tokens},
                   {"latency_ms", r.latency_ms},
                   {"cost", r.cost.to_string()},
                   {"cached", r.cached},
                   {"request_digest", r.request_digest}};
  if (r.error) j["error"] = *r.error;
  return j;
}

EvalRecord record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  try {
    r.task_id = j.at("task_id").get<std::string>();
    r.category = j.value("category", "");
    r.label = j.at("label").get<std::string>();
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error("unknown mode '" + j.at("mode").get<std::string>() + "'");
    r.mode = *mode;
    r.styles = j.value("styles", std::vector<std::string>{});
    r.trial = j.value("trial", 0);
    r.response_text = j.value("response_text", "");
    r.prediction = j.at("prediction").get<std::string>();
    r.correct = j.at("correct").get<bool>();
    r.usage.input_tokens = j.value("input_tokens", std::int64_t{0});
    r.usage.output_tokens = j.value("output_tokens", std::int64_t{0});
    r.latency_ms = j.value("latency_ms", 0.0);
    r.cost = Money::parse(j.value("cost", "0"));
    r.cached = j.value("cached", false);
    r.request_digest = j.value("request_digest", "");
    if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed run record: ") + e.what());
  }
  return r;
}

RunLog::RunLog(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw Error("cannot open run log " + path.string());
}

void RunLog::append(const EvalRecord& record) {
  const std::string line = to_json(record).dump() + "\n";
  std::lock_guard lock(mu_);
  out_ << line;
  out_.flush();
}

void RunLog::flush() {
  std::lock_guard lock(mu_);
  out_.flush();
}

std::vector<EvalRecord> RunLog::read(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      // A truncated final line (interrupted run) is tolerated.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

const ModeSummary* RunReport::find(std::string_view label) const noexcept {
  for (const auto& m : modes) {
    if (m.label == label) return &m;
  }
  return nullptr;
}

RunReport summarize(std::span<const EvalRecord> records, const SummaryOptions& options) {
  RunReport report;
  report.baseline = options.baseline;

  std::map<std::string, std::vector<const EvalRecord*>> by_label;
  std::map<std::string, std::vector<EvalRecord>> trials;
  for (const auto& r : records) {
    if (is_pass_label(r.label)) {
      trials[r.label.substr(0, r.label.size() - kPassSuffix.size())].push_back(r);
    } else {
      by_label[r.label].push_back(&r);
    }
  }

  for (const auto& [label, recs] : by_label) {
    ModeSummary s;
    s.label = label;
    s.mode = std::string(to_string(recs.front()->mode));
    s.n = recs.size();
    std::int64_t in_tokens = 0;
    std::int64_t out_tokens = 0;
    for (const auto* r : recs) {
      s.correct += r->correct ? 1 : 0;
      s.errors += r->error ? 1 : 0;
      if (r->cached && !options.count_cached) continue;
      in_tokens += r->usage.input_tokens;
      out_tokens += r->usage.output_tokens;
      s.total_cost += r->cost;
    }
    const auto n = static_cast<double>(s.n);
    s.accuracy = static_cast<double>(s.correct) / n;
    s.mean_input_tokens = static_cast<double>(in_tokens) / n;
    s.mean_output_tokens = static_cast<double>(out_tokens) / n;
    s.mean_sum_tokens = static_cast<double>(in_tokens + out_tokens) / n;
    report.total_cost += s.total_cost;
    report.modes.push_back(std::move(s));
  }
  std::stable_sort(report.modes.begin(), report.modes.end(), [](const ModeSummary& a, const ModeSummary& b) {
    const int ra = mode_rank(a.mode);
    const int rb = mode_rank(b.mode);
    return ra != rb ? ra < rb : a.label < b.label;
  });
  if (const auto* base = report.find(options.baseline)) {
    const double base_acc = base->accuracy;
    for (auto& m : report.modes) m.gain = m.accuracy - base_acc;
  }

  for (auto& [label, recs] : trials) {
    int max_k = 0;
    std::map<std::string, bool> tasks;
    for (const auto& r : recs) {
      max_k = std::max(max_k, r.trial + 1);
      tasks[r.task_id] = true;
      if (!r.cached || options.count_cached) report.total_cost += r.cost;
    }
    PassAtKSummary p;
    p.label = label;
    p.tasks = tasks.size();
    p.pass_at = pass_at_k_curve(recs, max_k);
    report.pass_at_k.push_back(std::move(p));
  }
  return report;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["baseline"] = baseline;
  j["total_cost"] = total_cost.to_string();
  j["modes"] = nlohmann::json::array();
  for (const auto& m : modes) {
    j["modes"].push_back({{"label", m.label},
                          {"mode", m.mode},
                          {"n", m.n},
                          {"correct", m.correct},
                          {"errors", m.errors},
                          {"acc", m.accuracy},
                          {"gain", m.gain ? nlohmann::json(*m.gain) : nlohmann::json(nullptr)},
                          {"input_tokens", m.mean_input_tokens},
                          {"output_tokens", m.mean_output_tokens},
                          {"sum_tokens", m.mean_sum_tokens},
                          {"cost", m.total_cost.to_string()}});
  }
  j["pass_at_k"] = nlohmann::json::array();
  for (const auto& p : pass_at_k) {
    j["pass_at_k"].push_back({{"label", p.label}, {"tasks", p.tasks}, {"pass_at", p.pass_at}});
  }
  j["curves"] = nlohmann::json::array();
  for (const auto& c : curves) {
    j["curves"].push_back({{"task_id", c.task_id}, {"t", c.t}, {"metric", c.metric}, {"order", c.order}});
  }
  return j;
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  RunReport r;
  try {
    r.baseline = j.at("baseline").get<std::string>();
    r.total_cost = Money::parse(j.at("total_cost").get<std::string>());
    for (const auto& m : j.at("modes")) {
      ModeSummary s;
      s.label = m.at("label").get<std::string>();
      s.mode = m.at("mode").get<std::string>();
      s.n = m.at("n").get<std::size_t>();
      s.correct = m.at("correct").get<std::size_t>();
      s.errors = m.at("errors").get<std::size_t>();
      s.accuracy = m.at("acc").get<double>();
      if (!m.at("gain").is_null()) s.gain = m.at("gain").get<double>();
      s.mean_input_tokens = m.at("input_tokens").get<double>();
      s.mean_output_tokens = m.at("output_tokens").get<double>();
      s.mean_sum_tokens = m.at("sum_tokens").get<double>();
      s.total_cost = Money::parse(m.at("cost").get<std::string>());
      r.modes.push_back(std::move(s));
    }
    for (const auto& p : j.value("pass_at_k", nlohmann::json::array())) {
      r.pass_at_k.push_back({p.at("label").get<std::string>(), p.at("tasks").get<std::size_t>(),
                             p.at("pass_at").get<std::vector<double>>()});
    }
    for (const auto& c : j.value("curves", nlohmann::json::array())) {
      r.curves.push_back({c.at("task_id").get<std::string>(), c.at("t").get<int>(), c.at("metric").get<double>(),
                          c.at("order").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string RunReport::to_markdown() const {
  std::ostringstream md;
  md << "| Mode | N | ACC | Gain | Input Tokens | Output Tokens | Sum Tokens | Cost | Errors |\n";
  md << "|---|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& m : modes) {
    md << "| " << md_cell(m.label) << " | " << m.n << " | " << fixed(m.accuracy, 4) << " | "
       << (m.gain ? fixed(*m.gain, 4, true) : std::string("n/a")) << " | " << fixed(m.mean_input_tokens, 2) << " | "
       << fixed(m.mean_output_tokens, 2) << " | " << fixed(m.mean_sum_tokens, 2) << " | " << m.total_cost.to_string()
       << " | " << m.errors << " |\n";
  }
  md << "\nBaseline: " << md_cell(baseline) << ". Total cost: " << total_cost.to_string() << "\n";

  if (!pass_at_k.empty()) {
    std::size_t max_k = 0;
    for (const auto& p : pass_at_k) max_k = std::max(max_k, p.pass_at.size());
    md << "\n| Mode | Tasks |";
    for (std::size_t k = 1; k <= max_k; ++k) md << " pass@" << k << " |";
    md << "\n|---|---:|";
    for (std::size_t k = 1; k <= max_k; ++k) md << "---:|";
    md << "\n";
    for (const auto& p : pass_at_k) {
      md << "| " << md_cell(p.label) << " | " << p.tasks << " |";
      for (std::size_t k = 0; k < max_k; ++k) {
        md << " " << (k < p.pass_at.size() ? fixed(p.pass_at[k], 4) : std::string("n/a")) << " |";
      }
      md << "\n";
    }
  }
  return md.str();
}

std::string RunReport::curves_csv() const {
  std::string out = "task_id,t,metric,order\n";
  for (const auto& c : curves) {
    out += csv_field(c.task_id) + "," + std::to_string(c.t) + "," + shortest(c.metric) + "," + csv_field(c.order) +
           "\n";
  }
  return out;
}

ReportPaths emit_report(const RunReport& report, const std::filesystem::path& dir) {
  ReportPaths paths{dir / "report.json", dir / "report.md", std::nullopt};
  write_file(paths.json, report.to_json().dump(2) + "\n");
  write_file(paths.markdown, report.to_markdown());
  if (!report.curves.empty()) {
    paths.curves_csv = dir / "curves.csv";
    write_file(*paths.curves_csv, report.curves_csv());
  }
  return paths;
}

}  // namespace vat
