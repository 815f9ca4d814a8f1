// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vat/prompt.hpp"

namespace vat {

class ResponseCache;

enum class ChatRole { System, User, Assistant };

std::string_view to_string(ChatRole role) noexcept;

struct ChatMessage {
  ChatRole role = ChatRole::User;
  std::vector<PromptPart> parts;
};

/// A full conversation. Single-turn prompts are one user message.
struct ChatRequest {
  std::vector<ChatMessage> messages;
  /// Names one of several samples of the same request (task and trial).
  /// Not sent and not part of the cache key; keys mock draws.
  std::string sample_tag;

  static ChatRequest from_bundle(const PromptBundle& bundle);
  std::size_t assistant_turns() const noexcept;
};

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  std::int64_t sum() const noexcept { return input_tokens + output_tokens; }
  TokenUsage& operator+=(const TokenUsage& o) noexcept {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) noexcept { return a += b; }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct TokenAlternative {
  std::string token;
  double logprob = 0.0;
  friend bool operator==(const TokenAlternative&, const TokenAlternative&) = default;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
  std::vector<TokenAlternative> alternatives;
  friend bool operator==(const TokenLogprob&, const TokenLogprob&) = default;
};

struct ModelResponse {
  std::string text;
  TokenUsage usage;
  double latency_ms = 0.0;
  std::optional<std::vector<TokenLogprob>> logprobs;
  bool cached = false;

  friend bool operator==(const ModelResponse&, const ModelResponse&) = default;
};

nlohmann::json to_json(const ModelResponse& r);
ModelResponse response_from_json(const nlohmann::json& j);

struct LiveBackendConfig {
  std::string base_url;                 // e.g. https://api.openai.com/v1
  std::string model_name;
  std::string api_key_env = "OPENAI_API_KEY";  // name of the env var, never the key
  bool supports_logprobs = true;
  std::string max_tokens_field = "max_tokens";
};

struct MockBackendConfig {
  std::filesystem::path script_path;
  std::optional<std::uint64_t> seed;  // replaces the script's seed when set
};

struct ModelConfig {
  std::variant<LiveBackendConfig, MockBackendConfig> backend = MockBackendConfig{};
  double temperature = 0.0;
  int max_output_tokens = 1024;
  /// Opaque key/value passthrough merged into live request bodies
  /// (e.g. {"reasoning_effort": "medium"}).
  nlohmann::json reasoning_control = nlohmann::json::object();
  bool request_logprobs = false;
  int top_logprobs = 0;

  /// Throws ConfigError on temperature < 0, top_logprobs without logprobs, etc.
  void validate() const;
  bool is_live() const noexcept { return std::holds_alternative<LiveBackendConfig>(backend); }
  std::string model_name() const;
};

/// Loads a backend description: "mock:<script.yaml>" or "live:<config.yaml>".
/// A live config file holds base_url, model, api_key_env, and optionally
/// temperature, max_output_tokens, reasoning (map), logprobs, top_logprobs.
ModelConfig load_backend_spec(std::string_view spec);

/// One attempt against a backend. Implementations throw AuthError,
/// RateLimited, TransportError, BackendRefusal, or ScriptError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ModelResponse complete(const ChatRequest& request, const ModelConfig& config) = 0;
  virtual bool supports_logprobs() const = 0;
  /// Stable identity folded into cache keys (endpoint + model, or script digest).
  virtual std::string identity() const = 0;
};

struct RequestRecord {
  nlohmann::json canonical;
  std::string digest;  // sha256 of canonical.dump()
};

/// Normalized serialization of everything that determines a completion.
/// Image parts contribute the digest of their encoded PNG and any annotations.
RequestRecord canonical_request(const ChatRequest& request, const ModelConfig& config,
                                std::string_view backend_identity);

/// Identity string for `config`'s backend: "live:<base_url>" or
/// "mock:<sha256 of the script file>".
std::string backend_identity(const ModelConfig& config);

/// 256-bit content hash of a single-turn request (hex).
std::string cache_key(const PromptBundle& bundle, const ModelConfig& config);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};
};

struct GatewayOptions {
  std::optional<std::filesystem::path> cache_dir;  // in-memory only when empty
  bool cache_enabled = true;
  std::size_t parallelism = 4;
  double requests_per_minute = 0.0;  // 0 disables rate limiting
  RetryPolicy retry;
};

struct SendOptions {
  bool use_cache = true;
  std::string sample_tag;  // set on uncached requests as ChatRequest::sample_tag
};

struct GatewayStats {
  std::uint64_t requests = 0;    // send() calls
  std::uint64_t cache_hits = 0;
  std::uint64_t backend_calls = 0;
  std::uint64_t retries = 0;
  std::uint64_t cache_writes = 0;
};

/// Token bucket shared by every request of one gateway.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute);
  void acquire();

 private:
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

/// Executes prompts against a backend with caching (temperature 0 only),
/// retries with exponential backoff for transient failures, a shared rate
/// limit, and a bound on concurrent backend calls.
class Gateway {
 public:
  Gateway(ModelConfig config, std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Builds the backend named by `config` (mock script or live endpoint).
  static std::unique_ptr<Gateway> create(ModelConfig config, GatewayOptions options = {});

  ModelResponse send(const PromptBundle& bundle, SendOptions opts = {});
  ModelResponse send(const ChatRequest& request, SendOptions opts = {});

  std::string key_for(const ChatRequest& request) const;

  const ModelConfig& config() const noexcept { return config_; }
  const ChatBackend& backend() const noexcept { return *backend_; }
  bool logprobs_available() const noexcept;
  GatewayStats stats() const noexcept;

 private:
  ModelResponse call_with_retries(const ChatRequest& request, const ModelConfig& config);

  ModelConfig config_;
  std::shared_ptr<ChatBackend> backend_;
  GatewayOptions options_;
  std::string identity_;
  std::unique_ptr<ResponseCache> cache_;
  RateLimiter limiter_;
  std::counting_semaphore<1024> slots_;

  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> retries_{0};
};

}  // namespace vat
