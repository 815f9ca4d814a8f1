// SPDX-License-Identifier: Apache-2.0

#include "vat/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "vat/digest.hpp"
#include "vat/error.hpp"
#include "vat/mock_backend.hpp"
#include "vat/openai_backend.hpp"
#include "vat/response_cache.hpp"

namespace vat {

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

nlohmann::json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar: {
      const std::string& s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted
      if (s == "true" || s == "True") return true;
      if (s == "false" || s == "False") return false;
      try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos == s.size()) return v;
      } catch (...) {
      }
      try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
      } catch (...) {
      }
      return s;
    }
    case YAML::NodeType::Sequence: {
      auto arr = nlohmann::json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      auto obj = nlohmann::json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
  }
  return nullptr;
}

}  // namespace

std::string_view to_string(ChatRole role) noexcept {
  switch (role) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
  }
  return "user";
}

ChatRequest ChatRequest::from_bundle(const PromptBundle& bundle) {
  return ChatRequest{{ChatMessage{ChatRole::User, bundle.parts}}, {}};
}

std::size_t ChatRequest::assistant_turns() const noexcept {
  return static_cast<std::size_t>(std::count_if(messages.begin(), messages.end(), [](const auto& m) {
    return m.role == ChatRole::Assistant;
  }));
}

nlohmann::json to_json(const ModelResponse& r) {
  nlohmann::json j = {{"text", r.text},
                      {"usage", {{"input_tokens", r.usage.input_tokens},
                                 {"output_tokens", r.usage.output_tokens}}},
                      {"latency_ms", r.latency_ms}};
  if (r.logprobs) {
    auto arr = nlohmann::json::array();
    for (const auto& t : *r.logprobs) {
      auto alts = nlohmann::json::array();
      for (const auto& a : t.alternatives) alts.push_back({{"token", a.token}, {"logprob", a.logprob}});
      arr.push_back({{"token", t.token}, {"logprob", t.logprob}, {"alternatives", alts}});
    }
    j["logprobs"] = arr;
  } else {
    j["logprobs"] = nullptr;
  }
  return j;
}

ModelResponse response_from_json(const nlohmann::json& j) {
  ModelResponse r;
  r.text = j.at("text").get<std::string>();
  r.usage.input_tokens = j.at("usage").at("input_tokens").get<std::int64_t>();
  r.usage.output_tokens = j.at("usage").at("output_tokens").get<std::int64_t>();
  r.latency_ms = j.value("latency_ms", 0.0);
  if (j.contains("logprobs") && !j["logprobs"].is_null()) {
    std::vector<TokenLogprob> out;
    for (const auto& t : j["logprobs"]) {
      TokenLogprob tl{t.at("token").get<std::string>(), t.at("logprob").get<double>(), {}};
      for (const auto& a : t.value("alternatives", nlohmann::json::array())) {
        tl.alternatives.push_back({a.at("token").get<std::string>(), a.at("logprob").get<double>()});
      }
      out.push_back(std::move(tl));
    }
    r.logprobs = std::move(out);
  }
  return r;
}

void ModelConfig::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
  if (top_logprobs < 0) throw ConfigError("top_logprobs must be >= 0");
  if (top_logprobs > 0 && !request_logprobs) {
    throw ConfigError("top_logprobs > 0 requires request_logprobs");
  }
  if (!reasoning_control.is_object()) throw ConfigError("reasoning_control must be a map");
  if (const auto* live = std::get_if<LiveBackendConfig>(&backend)) {
    if (live->base_url.empty()) throw ConfigError("live backend needs base_url");
    if (live->model_name.empty()) throw ConfigError("live backend needs a model name");
    if (live->api_key_env.empty()) throw ConfigError("live backend needs api_key_env");
  } else {
    const auto& mock = std::get<MockBackendConfig>(backend);
    if (mock.script_path.empty()) throw ConfigError("mock backend needs a script path");
  }
}

std::string ModelConfig::model_name() const {
  if (const auto* live = std::get_if<LiveBackendConfig>(&backend)) return live->model_name;
  return "mock";
}

ModelConfig load_backend_spec(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("backend must be 'mock:<script>' or 'live:<config>'");
  }
  const std::string kind(spec.substr(0, colon));
  const std::filesystem::path path(std::string(spec.substr(colon + 1)));
  ModelConfig config;
  if (kind == "mock") {
    if (!std::filesystem::exists(path)) throw ConfigError("mock script not found: " + path.string());
    config.backend = MockBackendConfig{path, std::nullopt};
    return config;
  }
  if (kind != "live") throw ConfigError("unknown backend kind '" + kind + "'");
  if (!std::filesystem::exists(path)) throw ConfigError("live config not found: " + path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  LiveBackendConfig live;
  live.base_url = root["base_url"].as<std::string>("");
  live.model_name = root["model"].as<std::string>("");
  live.api_key_env = root["api_key_env"].as<std::string>("OPENAI_API_KEY");
  live.supports_logprobs = root["supports_logprobs"].as<bool>(true);
  live.max_tokens_field = root["max_tokens_field"].as<std::string>("max_tokens");
  config.backend = live;
  config.temperature = root["temperature"].as<double>(0.0);
  config.max_output_tokens = root["max_output_tokens"].as<int>(1024);
  config.request_logprobs = root["logprobs"].as<bool>(false);
  config.top_logprobs = root["top_logprobs"].as<int>(0);
  if (root["reasoning"]) config.reasoning_control = yaml_to_json(root["reasoning"]);
  config.validate();
  return config;
}

RequestRecord canonical_request(const ChatRequest& request, const ModelConfig& config,
                                std::string_view identity) {
  auto messages = nlohmann::json::array();
  for (const auto& msg : request.messages) {
    auto parts = nlohmann::json::array();
    for (const auto& part : msg.parts) {
      if (const auto* text = std::get_if<TextPart>(&part)) {
        parts.push_back({{"type", "text"}, {"role", to_string(text->role)}, {"text", text->text}});
      } else {
        const auto& img = std::get<ImagePart>(part);
        nlohmann::json entry = {{"type", "image"}, {"role", to_string(img.role)}, {"png_sha256", img.image->digest}};
        // Scripted backends can read annotations, so they take part in the key.
        if (!img.annotations.empty()) entry["annotations"] = img.annotations;
        parts.push_back(std::move(entry));
      }
    }
    messages.push_back({{"role", to_string(msg.role)}, {"parts", parts}});
  }
  RequestRecord record;
  record.canonical = {{"backend", identity},
                      {"model", config.model_name()},
                      {"temperature", config.temperature},
                      {"max_output_tokens", config.max_output_tokens},
                      {"reasoning_control", config.reasoning_control},
                      {"logprobs", config.request_logprobs},
                      {"top_logprobs", config.top_logprobs},
                      {"messages", messages}};
  record.digest = sha256_hex(record.canonical.dump());
  return record;
}

std::string backend_identity(const ModelConfig& config) {
  if (const auto* live = std::get_if<LiveBackendConfig>(&config.backend)) {
    return "live:" + live->base_url;
  }
  const auto& mock = std::get<MockBackendConfig>(config.backend);
  return MockBackend::identity_for(read_file(mock.script_path), mock.seed);
}

std::string cache_key(const PromptBundle& bundle, const ModelConfig& config) {
  return canonical_request(ChatRequest::from_bundle(bundle), config, backend_identity(config)).digest;
}

RateLimiter::RateLimiter(double requests_per_minute)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, requests_per_minute / 60.0)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_per_sec_ <= 0.0) return;
  for (;;) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_,
                         tokens_ + std::chrono::duration<double>(now - last_).count() * rate_per_sec_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_per_sec_);
    }
    std::this_thread::sleep_for(wait);
  }
}

Gateway::Gateway(ModelConfig config, std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      options_(std::move(options)),
      identity_(backend_->identity()),
      cache_(std::make_unique<ResponseCache>(options_.cache_dir)),
      limiter_(options_.requests_per_minute),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options_.parallelism, 1, 1024))) {
  if (options_.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
}

Gateway::~Gateway() = default;

std::unique_ptr<Gateway> Gateway::create(ModelConfig config, GatewayOptions options) {
  config.validate();
  std::shared_ptr<ChatBackend> backend;
  if (const auto* live = std::get_if<LiveBackendConfig>(&config.backend)) {
    backend = std::make_shared<OpenAIChatBackend>(*live);
  } else {
    const auto& mock = std::get<MockBackendConfig>(config.backend);
    backend = MockBackend::from_file(mock.script_path, mock.seed);
  }
  return std::make_unique<Gateway>(std::move(config), std::move(backend), std::move(options));
}

bool Gateway::logprobs_available() const noexcept {
  return config_.request_logprobs && backend_->supports_logprobs();
}

GatewayStats Gateway::stats() const noexcept {
  return GatewayStats{requests_.load(), cache_hits_.load(), backend_calls_.load(), retries_.load(),
                      cache_->writes()};
}

std::string Gateway::key_for(const ChatRequest& request) const {
  ModelConfig cfg = config_;
  if (cfg.request_logprobs && !backend_->supports_logprobs()) {
    cfg.request_logprobs = false;
    cfg.top_logprobs = 0;
  }
  return canonical_request(request, cfg, identity_).digest;
}

ModelResponse Gateway::send(const PromptBundle& bundle, SendOptions opts) {
  return send(ChatRequest::from_bundle(bundle), opts);
}

ModelResponse Gateway::send(const ChatRequest& request, SendOptions opts) {
  ++requests_;
  ModelConfig cfg = config_;
  if (cfg.request_logprobs && !backend_->supports_logprobs()) {
    cfg.request_logprobs = false;
    cfg.top_logprobs = 0;
  }
  const bool use_cache = options_.cache_enabled && opts.use_cache && cfg.temperature == 0.0;
  if (!use_cache) {
    if (opts.sample_tag.empty()) return call_with_retries(request, cfg);
    ChatRequest tagged = request;
    tagged.sample_tag = opts.sample_tag;
    return call_with_retries(tagged, cfg);
  }

  const RequestRecord record = canonical_request(request, cfg, identity_);
  if (auto hit = cache_->get(record.digest)) {
    ++cache_hits_;
    hit->cached = true;
    return *hit;
  }
  ModelResponse response = call_with_retries(request, cfg);
  response.cached = false;
  cache_->put(record.digest, record.canonical, response);
  return response;
}

ModelResponse Gateway::call_with_retries(const ChatRequest& request, const ModelConfig& config) {
  const RetryPolicy& policy = options_.retry;
  double delay_ms = static_cast<double>(policy.base_delay.count());
  for (int attempt = 1;; ++attempt) {
    try {
      limiter_.acquire();
      SlotGuard slot(slots_);
      ++backend_calls_;
      return backend_->complete(request, config);
    } catch (const RateLimited&) {
      if (attempt >= policy.max_attempts) throw;
    } catch (const TransportError&) {
      if (attempt >= policy.max_attempts) throw;
    }
    ++retries_;
    const double capped = std::min(delay_ms, static_cast<double>(policy.max_delay.count()));
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(capped));
    delay_ms *= policy.multiplier;
  }
}

}  // namespace vat
