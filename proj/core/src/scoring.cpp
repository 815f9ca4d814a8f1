// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <map>

#include "vat/error.hpp"
#include "vat/harness.hpp"

namespace vat {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view strip_decoration(std::string_view s) {
  // Markdown emphasis and stray quotes around the answer.
  auto deco = [](char c) { return c == '*' || c == '_' || c == '`' || c == '"' || c == '\'' || is_space(c); };
  while (!s.empty() && deco(s.front())) s.remove_prefix(1);
  while (!s.empty() && deco(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view reduce_remainder(std::string_view rest) {
  rest = strip_decoration(rest);
  if (!rest.empty() && rest.front() == '(') {
    const auto close = rest.find(')');
    if (close != std::string_view::npos) return trim(rest.substr(1, close - 1));
  }
  auto trailing = [](char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == ')' || is_space(c) ||
           c == '*' || c == '"' || c == '\'';
  };
  while (!rest.empty() && trailing(rest.back())) rest.remove_suffix(1);
  while (!rest.empty() && (rest.front() == '(' || is_space(rest.front()))) rest.remove_prefix(1);
  return rest;
}

std::vector<std::string_view> tokens_of(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_alnum(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && is_alnum(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string extract_answer(std::string_view text) {
  std::string lowered(text);
  for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  constexpr std::string_view kMarker = "answer:";
  const auto pos = lowered.rfind(kMarker);
  if (pos == std::string::npos) return std::string(trim(text));

  std::string_view after = text.substr(pos + kMarker.size());
  auto eol = after.find('\n');
  std::string_view line = after.substr(0, eol);
  std::string_view reduced = reduce_remainder(line);
  while (reduced.empty() && eol != std::string_view::npos) {
    after.remove_prefix(eol + 1);
    eol = after.find('\n');
    line = after.substr(0, eol);
    reduced = reduce_remainder(line);
  }
  return std::string(reduced);
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::string_view v = out;
  while (!v.empty() && (is_punct(v.front()) || is_space(v.front()))) v.remove_prefix(1);
  while (!v.empty() && (is_punct(v.back()) || is_space(v.back()))) v.remove_suffix(1);
  return std::string(v);
}

bool f_correct(std::string_view prediction, std::string_view ground_truth) {
  const std::string p = normalize_answer(prediction);
  const std::string g = normalize_answer(ground_truth);
  if (p.empty() || g.empty()) return false;
  if (g.size() == 1 && is_alnum(g[0])) {
    const auto toks = tokens_of(p);
    return std::find(toks.begin(), toks.end(), std::string_view(g)) != toks.end();
  }
  if (p.find(g) != std::string::npos) return true;
  return p.size() > 1 && g.find(p) != std::string::npos;
}

double accuracy(std::span<const EvalRecord> records) {
  if (records.empty()) throw EmptyRun("accuracy of an empty run");
  std::size_t correct = 0;
  for (const auto& r : records) correct += r.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

std::vector<double> pass_at_k_curve(std::span<const EvalRecord> trials, int max_k) {
  if (max_k < 1) throw std::invalid_argument("k must be >= 1");
  if (trials.empty()) throw EmptyRun("pass@k over no trials");
  // First correct trial index per (label, task); max_k when none.
  std::map<std::pair<std::string, std::string>, int> first_hit;
  for (const auto& r : trials) {
    auto [it, inserted] = first_hit.try_emplace({r.label, r.task_id}, max_k);
    if (r.correct && r.trial < it->second) it->second = r.trial;
  }
  std::vector<double> curve(static_cast<std::size_t>(max_k), 0.0);
  for (int k = 1; k <= max_k; ++k) {
    std::size_t hits = 0;
    for (const auto& [key, first] : first_hit) hits += first < k ? 1 : 0;
    curve[static_cast<std::size_t>(k - 1)] = static_cast<double>(hits) / static_cast<double>(first_hit.size());
  }
  return curve;
}

}  // namespace vat
