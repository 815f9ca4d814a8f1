// SPDX-License-Identifier: Apache-2.0

#include "vat/mock_backend.hpp"

#include <cctype>
#include <cmath>

#include <yaml-cpp/yaml.h>

#include "vat/digest.hpp"
#include "vat/error.hpp"
#include "vat/random.hpp"

namespace vat {

namespace {

TokenUsage parse_usage(const YAML::Node& node) {
  if (!node.IsMap()) throw ScriptError("usage must be a map with input/output");
  return TokenUsage{node["input"].as<std::int64_t>(0), node["output"].as<std::int64_t>(0)};
}

MockBackend::Condition parse_condition(const YAML::Node& node) {
  MockBackend::Condition c;
  if (!node) return c;
  if (!node.IsMap()) throw ScriptError("'when' must be a map");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (key == "has_abstract") c.has_abstract = kv.second.as<bool>();
    else if (key == "has_role") c.has_role = kv.second.as<std::string>();
    else if (key == "min_images") c.min_images = kv.second.as<int>();
    else if (key == "max_images") c.max_images = kv.second.as<int>();
    else if (key == "text_contains") c.text_contains = kv.second.as<std::string>();
    else if (key == "turn") c.turn = kv.second.as<int>();
    else throw ScriptError("unknown condition '" + key + "'");
  }
  return c;
}

MockBackend::Rule parse_rule(const YAML::Node& node) {
  if (!node.IsMap()) throw ScriptError("each rule must be a map");
  MockBackend::Rule r;
  r.when = parse_condition(node["when"]);
  if (node["respond"]) r.respond = node["respond"].as<std::string>();
  if (node["usage"]) r.usage = parse_usage(node["usage"]);
  if (const auto b = node["bernoulli"]) {
    MockBackend::Bernoulli bern;
    bern.p = b["p"].as<double>();
    bern.correct = b["correct"].as<std::string>();
    bern.wrong = b["wrong"].as<std::string>();
    if (!(bern.p >= 0.0 && bern.p <= 1.0)) throw ScriptError("bernoulli.p must be in [0, 1]");
    r.bernoulli = bern;
  }
  if (const auto l = node["logprob"]) {
    MockBackend::LogprobRule lp;
    lp.token = l["token"].as<std::string>();
    lp.base = l["base"].as<double>(0.0);
    if (const auto terms = l["terms"]) {
      for (const auto& kv : terms) lp.terms[kv.first.as<std::string>()] = kv.second.as<double>();
    }
    r.logprob = lp;
  }
  if (!r.respond && !r.bernoulli) throw ScriptError("rule needs 'respond' or 'bernoulli'");
  return r;
}

struct RequestView {
  bool has_abstract = false;
  int images = 0;
  std::size_t turn = 0;
  std::vector<const TextPart*> texts;
  std::vector<const ImagePart*> image_parts;
  std::vector<PartRole> roles;
};

RequestView view_of(const ChatRequest& request) {
  RequestView v;
  v.turn = request.assistant_turns();
  for (const auto& msg : request.messages) {
    for (const auto& part : msg.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        v.texts.push_back(t);
        v.roles.push_back(t->role);
      } else {
        const auto& img = std::get<ImagePart>(part);
        ++v.images;
        v.image_parts.push_back(&img);
        v.roles.push_back(img.role);
        v.has_abstract = v.has_abstract || img.role == PartRole::Abstract;
      }
    }
  }
  return v;
}

bool matches(const MockBackend::Condition& c, const RequestView& v) {
  if (c.has_abstract && *c.has_abstract != v.has_abstract) return false;
  if (c.min_images && v.images < *c.min_images) return false;
  if (c.max_images && v.images > *c.max_images) return false;
  if (c.turn && static_cast<std::size_t>(*c.turn) != v.turn) return false;
  if (c.has_role) {
    bool found = false;
    for (PartRole r : v.roles) found = found || to_string(r) == *c.has_role;
    if (!found) return false;
  }
  if (c.text_contains) {
    bool found = false;
    for (const auto* t : v.texts) found = found || t->text.find(*c.text_contains) != std::string::npos;
    if (!found) return false;
  }
  return true;
}

std::int64_t quarter_tokens(std::size_t chars) {
  return static_cast<std::int64_t>((chars + 3) / 4);
}

}  // namespace

MockBackend::MockBackend(Script script, std::string identity)
    : script_(std::move(script)), identity_(std::move(identity)) {}

std::string MockBackend::identity_for(std::string_view script_text, std::optional<std::uint64_t> seed) {
  std::string id = "mock:" + sha256_hex(script_text);
  if (seed) id += ":seed=" + std::to_string(*seed);
  return id;
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path,
                                                    std::optional<std::uint64_t> seed) {
  const std::string text = read_file(path);
  Script script = parse_script(text);
  if (seed) script.seed = *seed;
  return std::make_shared<MockBackend>(std::move(script), identity_for(text, seed));
}

MockBackend::Script MockBackend::parse_script(std::string_view text) {
  try {
    const YAML::Node root = YAML::Load(std::string(text));
    if (!root.IsMap()) throw ScriptError("mock script must be a map");
    Script s;
    s.seed = root["seed"].as<std::uint64_t>(0);
    if (root["default"]) s.fallback = root["default"].as<std::string>();
    if (root["usage"]) s.usage = parse_usage(root["usage"]);
    s.latency_ms = root["latency_ms"].as<double>(0.0);
    s.supports_logprobs = root["supports_logprobs"].as<bool>(true);
    if (const auto rules = root["rules"]) {
      if (!rules.IsSequence()) throw ScriptError("'rules' must be a list");
      for (const auto& r : rules) s.rules.push_back(parse_rule(r));
    }
    return s;
  } catch (const YAML::Exception& e) {
    throw ScriptError(std::string("malformed mock script: ") + e.what());
  }
}

std::vector<std::string> MockBackend::tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isalnum(static_cast<unsigned char>(text[i]))) {
      std::size_t j = i;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.emplace_back(text.substr(i, 1));
      ++i;
    }
  }
  return out;
}

double MockBackend::draw(const std::string& request_digest, const std::string& sample_tag) {
  std::uint64_t n;
  if (!sample_tag.empty()) {
    n = std::stoull(sha256_hex(sample_tag).substr(0, 16), nullptr, 16);
  } else {
    std::lock_guard lock(mu_);
    n = calls_[request_digest]++;
  }
  const std::uint64_t key = std::stoull(request_digest.substr(0, 16), nullptr, 16);
  const std::uint64_t x = mix64(script_.seed ^ mix64(key ^ mix64(n)));
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

ModelResponse MockBackend::complete(const ChatRequest& request, const ModelConfig& config) {
  const RequestView view = view_of(request);
  const Rule* rule = nullptr;
  for (const auto& r : script_.rules) {
    if (matches(r.when, view)) {
      rule = &r;
      break;
    }
  }

  ModelResponse out;
  if (rule && rule->bernoulli) {
    const double u = draw(canonical_request(request, config, identity_).digest, request.sample_tag);
    out.text = u < rule->bernoulli->p ? rule->bernoulli->correct : rule->bernoulli->wrong;
  } else if (rule) {
    out.text = *rule->respond;
  } else if (script_.fallback) {
    out.text = *script_.fallback;
  } else {
    throw ScriptError("no mock rule matched the request and the script has no default");
  }

  if (rule && rule->usage) {
    out.usage = *rule->usage;
  } else if (script_.usage) {
    out.usage = *script_.usage;
  } else {
    std::size_t chars = 0;
    for (const auto* t : view.texts) chars += t->text.size();
    out.usage.input_tokens = quarter_tokens(chars) + 85 * view.images;
    out.usage.output_tokens = std::max<std::int64_t>(1, quarter_tokens(out.text.size()));
  }
  out.latency_ms = script_.latency_ms;

  if (config.request_logprobs && script_.supports_logprobs) {
    std::vector<TokenLogprob> lps;
    double value = 0.0;
    if (rule && rule->logprob) {
      value = rule->logprob->base;
      for (const auto* img : view.image_parts) {
        for (const auto& [name, weight] : rule->logprob->terms) {
          if (auto it = img->annotations.find(name); it != img->annotations.end()) {
            value += weight * it->second;
          }
        }
      }
    }
    bool assigned = false;
    for (auto& tok : tokenize(out.text)) {
      TokenLogprob tl{tok, 0.0, {}};
      if (!assigned && rule && rule->logprob && tok == rule->logprob->token) {
        tl.logprob = value;
        assigned = true;
      }
      if (config.top_logprobs > 0) tl.alternatives.push_back({tl.token, tl.logprob});
      lps.push_back(std::move(tl));
    }
    out.logprobs = std::move(lps);
  }
  return out;
}

}  // namespace vat
