// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>

#include <nlohmann/json.hpp>

#include "vat/gateway.hpp"

namespace vat {

/// OpenAI-compatible chat-completions client. Images travel as base64
/// `data:image/png` URLs inside multi-part user messages.
class OpenAIChatBackend final : public ChatBackend {
 public:
  explicit OpenAIChatBackend(LiveBackendConfig config,
                             std::chrono::milliseconds timeout = std::chrono::seconds(300));

  ModelResponse complete(const ChatRequest& request, const ModelConfig& config) override;
  bool supports_logprobs() const override { return logprobs_supported_.load(); }
  std::string identity() const override;

  /// Request body for `request` (exposed for inspection and tests).
  nlohmann::json build_body(const ChatRequest& request, const ModelConfig& config,
                            bool with_logprobs) const;
  static ModelResponse parse_body(const nlohmann::json& body);

 private:
  LiveBackendConfig config_;
  std::chrono::milliseconds timeout_;
  std::atomic<bool> logprobs_supported_;
};

}  // namespace vat
