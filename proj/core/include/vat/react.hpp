// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vat/abstraction.hpp"
#include "vat/gateway.hpp"
#include "vat/task.hpp"

namespace vat {

struct ReactAction {
  enum class Kind { None, Abstract, Answer };
  Kind kind = Kind::None;
  /// Style text for Abstract (as written), the full line for Answer.
  std::string argument;

  friend bool operator==(const ReactAction&, const ReactAction&) = default;
};

std::string_view to_string(ReactAction::Kind kind) noexcept;

/// First line of the form `Action: abstract(<style>)` or starting with
/// `ANSWER:` decides the action; None otherwise.
ReactAction parse_action(std::string_view completion);

struct ReactStep {
  int index = 0;
  std::string thought;
  ReactAction action;
  std::string completion;
  std::vector<std::string> observation_digests;  // one per task image on success
  std::optional<std::string> tool_error;
  TokenUsage usage;
  bool cached = false;
};

struct ReactEpisode {
  std::string task_id;
  std::vector<ReactStep> steps;
  ModelResponse final;
  int tool_invocations = 0;
  bool truncated = false;
  std::string prediction;
  bool correct = false;
  TokenUsage usage;
};

struct ReactOptions {
  int max_steps = 5;
  AbstractionConfig abstraction;
};

/// System preamble describing the Thought/Action/Observation format and the
/// `abstract(style)` tool.
std::string react_system_prompt();

/// Runs one episode. Transport and auth errors propagate; tool failures
/// become observations.
ReactEpisode run_react(Gateway& gateway, const TaskInstance& task, const ReactOptions& options = {});

nlohmann::json to_json(const ReactStep& step, std::string_view task_id);
/// One JSON line per step.
void write_trace(const ReactEpisode& episode, std::ostream& out);

}  // namespace vat
