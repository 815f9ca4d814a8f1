// SPDX-License-Identifier: Apache-2.0

#include "vat/react.hpp"

#include <cctype>
#include <ostream>

#include "vat/error.hpp"
#include "vat/harness.hpp"

namespace vat {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::optional<std::string> parse_abstract_call(std::string_view line) {
  if (!starts_with_ci(line, "action:")) return std::nullopt;
  std::string_view rest = trim(line.substr(7));
  if (!starts_with_ci(rest, "abstract")) return std::nullopt;
  rest = trim(rest.substr(8));
  if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')') return std::nullopt;
  std::string_view arg = trim(rest.substr(1, rest.size() - 2));
  if (arg.size() >= 2 && (arg.front() == '"' || arg.front() == '\'') && arg.back() == arg.front()) {
    arg = trim(arg.substr(1, arg.size() - 2));
  }
  return std::string(arg);
}

std::string thought_of(std::string_view completion) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= completion.size()) {
    const auto eol = completion.find('\n', pos);
    std::string_view line = trim(completion.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
    if (parse_abstract_call(line) || starts_with_ci(line, "answer:")) break;
    if (starts_with_ci(line, "thought:")) line = trim(line.substr(8));
    if (!line.empty()) {
      if (!out.empty()) out += '\n';
      out += line;
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return out;
}

std::string style_list() {
  std::string out;
  for (auto s : all_styles()) {
    if (!out.empty()) out += ", ";
    out += to_string(s);
  }
  return out;
}

}  // namespace

std::string_view to_string(ReactAction::Kind kind) noexcept {
  switch (kind) {
    case ReactAction::Kind::None: return "none";
    case ReactAction::Kind::Abstract: return "abstract";
    case ReactAction::Kind::Answer: return "answer";
  }
  return "?";
}

ReactAction parse_action(std::string_view completion) {
  std::size_t pos = 0;
  while (pos <= completion.size()) {
    const auto eol = completion.find('\n', pos);
    const std::string_view line =
        trim(completion.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
    if (auto style = parse_abstract_call(line)) return {ReactAction::Kind::Abstract, *style};
    if (starts_with_ci(line, "answer:")) return {ReactAction::Kind::Answer, std::string(line)};
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return {};
}

std::string react_system_prompt() {
  return "You answer questions about images. Work in steps. In each reply, write one line starting with "
         "\"Thought:\" and then exactly one of:\n"
         "Action: abstract(<style>)\n"
         "ANSWER: (your answer)\n"
         "The abstract tool converts every input image into a visual abstract that keeps contours and "
         "structure and drops texture. Available styles: " +
         style_list() +
         ". After an action you receive an Observation with the abstracts. When you are confident, reply "
         "with the ANSWER line, for example: ANSWER: (A).";
}

ReactEpisode run_react(Gateway& gateway, const TaskInstance& task, const ReactOptions& options) {
  if (options.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  PreparedTask prepared(task);
  const auto& originals = prepared.originals();

  ChatRequest conversation;
  conversation.messages.push_back({ChatRole::System, {TextPart{react_system_prompt(), PartRole::Instruction}}});
  ChatMessage first{ChatRole::User, {TextPart{task.question, PartRole::Question}}};
  for (const auto& img : originals) first.parts.push_back(ImagePart{img, PartRole::Original, {}});
  conversation.messages.push_back(std::move(first));

  ReactEpisode episode;
  episode.task_id = task.id;
  episode.truncated = true;

  for (int step = 0; step < options.max_steps; ++step) {
    ModelResponse response = gateway.send(conversation);
    ReactStep s;
    s.index = step;
    s.completion = response.text;
    s.thought = thought_of(response.text);
    s.action = parse_action(response.text);
    s.usage = response.usage;
    s.cached = response.cached;
    episode.usage += response.usage;
    episode.final = response;
    conversation.messages.push_back({ChatRole::Assistant, {TextPart{response.text, PartRole::Context}}});

    if (s.action.kind == ReactAction::Kind::Answer) {
      episode.steps.push_back(std::move(s));
      episode.truncated = false;
      break;
    }

    ChatMessage observation{ChatRole::User, {}};
    if (s.action.kind == ReactAction::Kind::Abstract) {
      const auto style = parse_style(s.action.argument);
      if (!style) {
        s.tool_error = "unknown style '" + s.action.argument + "'; available styles: " + style_list();
      } else {
        try {
          const auto& abstracts = prepared.abstracts(*style, options.abstraction);
          observation.parts.push_back(
              TextPart{"Observation: abstract(" + std::string(to_string(*style)) + ") of each input image.",
                       PartRole::Context});
          for (const auto& a : abstracts) {
            auto encoded = encode_for_prompt(a.image);
            s.observation_digests.push_back(encoded->digest);
            observation.parts.push_back(ImagePart{std::move(encoded), PartRole::Abstract, {}});
          }
          ++episode.tool_invocations;
        } catch (const Error& e) {
          observation.parts.clear();
          s.observation_digests.clear();
          s.tool_error = e.what();
        }
      }
      if (s.tool_error) {
        observation.parts = {TextPart{"Observation: error: " + *s.tool_error, PartRole::Context}};
      }
    } else {
      observation.parts.push_back(
          TextPart{"Observation: no action found. Reply with \"Action: abstract(<style>)\" or \"ANSWER: (...)\".",
                   PartRole::Context});
    }
    conversation.messages.push_back(std::move(observation));
    episode.steps.push_back(std::move(s));
  }

  episode.prediction = extract_answer(episode.final.text);
  episode.correct = f_correct(episode.prediction, task.ground_truth);
  return episode;
}

nlohmann::json to_json(const ReactStep& step, std::string_view task_id) {
  nlohmann::json j{{"task_id", task_id},
                   {"step", step.index},
                   {"thought", step.thought},
                   {"action", {{"kind", std::string(to_string(step.action.kind))}, {"argument", step.action.argument}}},
                   {"completion", step.completion},
                   {"observation", step.observation_digests},
                   {"input_tokens", step.usage.input_tokens},
                   {"output_tokens", step.usage.output_tokens},
                   {"cached", step.cached}};
  if (step.tool_error) j["tool_error"] = *step.tool_error;
  return j;
}

void write_trace(const ReactEpisode& episode, std::ostream& out) {
  for (const auto& s : episode.steps) out << to_json(s, episode.task_id).dump() << '\n';
}

}  // namespace vat
