// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vat/gateway.hpp"

namespace vat {

/// Scripted, deterministic stand-in for a chat model.
///
/// Script format (YAML or JSON):
///
///   seed: 1                      # stream seed for stochastic rules
///   default: "ANSWER: (A)"       # optional; unmatched requests raise ScriptError without it
///   usage: {input: 100, output: 8}   # optional; otherwise estimated from text
///   latency_ms: 0
///   supports_logprobs: true
///   rules:                       # first match wins
///     - when:                    # every listed condition must hold
///         has_abstract: true     # some image part has role "abstract"
///         has_role: composite    # some part has this role
///         min_images: 2
///         max_images: 2
///         text_contains: "..."   # some text part contains the string
///         turn: 1                # number of prior assistant messages
///       respond: "ANSWER: (B)"
///       usage: {input: 10, output: 3}
///       bernoulli: {p: 0.3, correct: "ANSWER: (A)", wrong: "ANSWER: (B)"}
///       logprob:                 # value reported for `token`
///         token: "A"
///         base: -1.0
///         terms: {abstract_gt_blocks: 0.1}   # sum of weight * image annotation
///
/// Stochastic draws are keyed on (seed, request digest, sample tag). Untagged
/// requests use a per-digest call count instead, which is only reproducible
/// when identical requests are not issued concurrently.
class MockBackend final : public ChatBackend {
 public:
  struct Condition {
    std::optional<bool> has_abstract;
    std::optional<std::string> has_role;
    std::optional<int> min_images;
    std::optional<int> max_images;
    std::optional<std::string> text_contains;
    std::optional<int> turn;
  };
  struct Bernoulli {
    double p = 0.0;
    std::string correct;
    std::string wrong;
  };
  struct LogprobRule {
    std::string token;
    double base = 0.0;
    std::map<std::string, double> terms;
  };
  struct Rule {
    Condition when;
    std::optional<std::string> respond;
    std::optional<Bernoulli> bernoulli;
    std::optional<TokenUsage> usage;
    std::optional<LogprobRule> logprob;
  };
  struct Script {
    std::uint64_t seed = 0;
    std::optional<std::string> fallback;
    std::optional<TokenUsage> usage;
    double latency_ms = 0.0;
    bool supports_logprobs = true;
    std::vector<Rule> rules;
  };

  explicit MockBackend(Script script, std::string identity = "mock:inline");

  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path,
                                                std::optional<std::uint64_t> seed = std::nullopt);
  /// "mock:<sha256 of the script text>", plus ":seed=<n>" when overridden.
  static std::string identity_for(std::string_view script_text, std::optional<std::uint64_t> seed);
  /// Throws ScriptError on malformed scripts.
  static Script parse_script(std::string_view text);

  ModelResponse complete(const ChatRequest& request, const ModelConfig& config) override;
  bool supports_logprobs() const override { return script_.supports_logprobs; }
  std::string identity() const override { return identity_; }

  /// Whitespace-preserving tokenization used for mock logprobs: runs of
  /// alphanumerics, and single other characters.
  static std::vector<std::string> tokenize(std::string_view text);

 private:
  double draw(const std::string& request_digest, const std::string& sample_tag);

  Script script_;
  std::string identity_;
  std::mutex mu_;
  std::map<std::string, std::uint64_t> calls_;
};

}  // namespace vat
