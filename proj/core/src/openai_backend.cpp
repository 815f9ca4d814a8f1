// SPDX-License-Identifier: Apache-2.0

#include "vat/openai_backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "http_util.hpp"
#include "vat/digest.hpp"
#include "vat/error.hpp"

namespace vat {

namespace {

nlohmann::json message_content(const ChatMessage& msg) {
  if (msg.role != ChatRole::User) {
    std::string text;
    for (const auto& part : msg.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        if (!text.empty()) text += "\n";
        text += t->text;
      }
    }
    return text;
  }
  auto content = nlohmann::json::array();
  for (const auto& part : msg.parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      content.push_back({{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImagePart>(part);
      content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:image/png;base64," + base64_encode(img.image->png)}}}});
    }
  }
  return content;
}

std::string error_message(const httplib::Response& res) {
  try {
    const auto j = nlohmann::json::parse(res.body);
    if (j.contains("error")) {
      const auto& e = j["error"];
      if (e.is_object() && e.contains("message")) return e["message"].get<std::string>();
      if (e.is_string()) return e.get<std::string>();
    }
  } catch (const nlohmann::json::exception&) {
  }
  return res.body.substr(0, 500);
}

}  // namespace

OpenAIChatBackend::OpenAIChatBackend(LiveBackendConfig config, std::chrono::milliseconds timeout)
    : config_(std::move(config)), timeout_(timeout), logprobs_supported_(config_.supports_logprobs) {}

std::string OpenAIChatBackend::identity() const { return "live:" + config_.base_url; }

nlohmann::json OpenAIChatBackend::build_body(const ChatRequest& request, const ModelConfig& config,
                                             bool with_logprobs) const {
  auto messages = nlohmann::json::array();
  for (const auto& msg : request.messages) {
    messages.push_back({{"role", to_string(msg.role)}, {"content", message_content(msg)}});
  }
  nlohmann::json body = {{"model", config_.model_name},
                         {"messages", messages},
                         {"temperature", config.temperature},
                         {config_.max_tokens_field, config.max_output_tokens}};
  if (with_logprobs) {
    body["logprobs"] = true;
    if (config.top_logprobs > 0) body["top_logprobs"] = config.top_logprobs;
  }
  for (const auto& [key, value] : config.reasoning_control.items()) body[key] = value;
  return body;
}

ModelResponse OpenAIChatBackend::parse_body(const nlohmann::json& body) {
  ModelResponse out;
  const auto& choice = body.at("choices").at(0);
  const auto& content = choice.at("message").value("content", nlohmann::json());
  if (content.is_string()) {
    out.text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& p : content) {
      if (p.value("type", "") == "text") out.text += p.value("text", "");
    }
  }
  if (body.contains("usage") && body["usage"].is_object()) {
    out.usage.input_tokens = body["usage"].value("prompt_tokens", std::int64_t{0});
    out.usage.output_tokens = body["usage"].value("completion_tokens", std::int64_t{0});
  }
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
    std::vector<TokenLogprob> lps;
    for (const auto& t : choice["logprobs"]["content"]) {
      TokenLogprob tl{t.value("token", ""), t.value("logprob", 0.0), {}};
      for (const auto& a : t.value("top_logprobs", nlohmann::json::array())) {
        tl.alternatives.push_back({a.value("token", ""), a.value("logprob", 0.0)});
      }
      lps.push_back(std::move(tl));
    }
    out.logprobs = std::move(lps);
  }
  return out;
}

ModelResponse OpenAIChatBackend::complete(const ChatRequest& request, const ModelConfig& config) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError("environment variable " + config_.api_key_env + " is not set");
  }
  const auto url = detail::split_url(config_.base_url);
  httplib::Client cli(url.origin);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  cli.set_write_timeout(timeout_);
  const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

  bool with_logprobs = config.request_logprobs && logprobs_supported_.load();
  for (;;) {
    const std::string payload = build_body(request, config, with_logprobs).dump();
    const auto start = std::chrono::steady_clock::now();
    auto res = cli.Post(url.prefix + "/chat/completions", headers, payload, "application/json");
    const double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
      throw TransportError("POST " + config_.base_url + "/chat/completions failed: " +
                           httplib::to_string(res.error()));
    }
    const int status = res->status;
    if (status == 200) {
      try {
        ModelResponse out = parse_body(nlohmann::json::parse(res->body));
        out.latency_ms = latency;
        return out;
      } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed completion body: ") + e.what());
      }
    }
    const std::string msg = error_message(*res);
    if (status == 401 || status == 403) throw AuthError("HTTP " + std::to_string(status) + ": " + msg);
    if (status == 429) throw RateLimited("HTTP 429: " + msg);
    if (status == 408 || status == 409 || status >= 500) {
      throw TransportError("HTTP " + std::to_string(status) + ": " + msg);
    }
    if (status == 400 && with_logprobs && msg.find("logprob") != std::string::npos) {
      // Endpoint rejects log-probabilities: remember and degrade.
      logprobs_supported_ = false;
      with_logprobs = false;
      continue;
    }
    throw BackendRefusal("HTTP " + std::to_string(status) + ": " + msg);
  }
}

}  // namespace vat
