// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support/test_support.hpp"
#include "vat/digest.hpp"
#include "vat/error.hpp"
#include "vat/gateway.hpp"
#include "vat/mock_backend.hpp"
#include "vat/response_cache.hpp"

using namespace vat;

namespace {

class CountingBackend : public ChatBackend {
 public:
  int calls = 0;
  int fail_first = 0;
  bool auth_fail = false;

  ModelResponse complete(const ChatRequest& request, const ModelConfig&) override {
    ++calls;
    if (auth_fail) throw AuthError("401");
    if (calls <= fail_first) {
      if (calls % 2) throw RateLimited("429");
      throw TransportError("reset");
    }
    return ModelResponse{"ANSWER: (A) turn " + std::to_string(request.assistant_turns()), {10, 2}, 1.0, {}, false};
  }
  bool supports_logprobs() const override { return false; }
  std::string identity() const override { return "counting"; }
};

ModelConfig mock_config() {
  ModelConfig c;
  c.backend = MockBackendConfig{"unused.yaml", std::nullopt};
  return c;
}

GatewayOptions fast_options(std::optional<std::filesystem::path> dir = std::nullopt) {
  GatewayOptions o;
  o.cache_dir = std::move(dir);
  o.retry.base_delay = std::chrono::milliseconds(1);
  o.retry.max_delay = std::chrono::milliseconds(2);
  return o;
}

PromptBundle bundle_for(const RasterImage& img, std::string question = "How many?") {
  const std::vector<std::shared_ptr<const EncodedImage>> imgs{encode_for_prompt(img)};
  return build_prompt(question, imgs, PromptMode::Standard);
}

std::shared_ptr<MockBackend> mock_from(std::string_view yaml) {
  return std::make_shared<MockBackend>(MockBackend::parse_script(yaml), "mock:test");
}

}  // namespace

TEST(Cache, HitAfterMissAndPersistsOnDisk) {
  vat::test::TempDir dir;
  std::mt19937_64 rng(1);
  const PromptBundle b = bundle_for(vat::test::random_rgb(8, 8, rng));
  auto backend = std::make_shared<CountingBackend>();
  {
    Gateway gw(mock_config(), backend, fast_options(dir.path()));
    const ModelResponse first = gw.send(b);
    const ModelResponse second = gw.send(b);
    EXPECT_FALSE(first.cached);
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(first.text, second.text);
    EXPECT_EQ(first.usage, second.usage);
    EXPECT_EQ(backend->calls, 1);
    EXPECT_EQ(gw.stats().cache_hits, 1u);
    EXPECT_EQ(gw.stats().cache_writes, 1u);
  }
  Gateway again(mock_config(), backend, fast_options(dir.path()));
  EXPECT_TRUE(again.send(b).cached);
  EXPECT_EQ(backend->calls, 1);
  const auto summary = ResponseCache::scan(dir.path());
  EXPECT_EQ(summary.entries, 1u);
  EXPECT_EQ(summary.corrupt, 0u);
  EXPECT_EQ(ResponseCache::clear(dir.path()), 1u);
  EXPECT_EQ(ResponseCache::scan(dir.path()).entries, 0u);
}

TEST(Cache, BypassedAtNonZeroTemperatureOrWhenDisabled) {
  std::mt19937_64 rng(1);
  const PromptBundle b = bundle_for(vat::test::random_rgb(8, 8, rng));
  auto backend = std::make_shared<CountingBackend>();
  ModelConfig warm = mock_config();
  warm.temperature = 0.7;
  Gateway gw(warm, backend, fast_options());
  gw.send(b);
  gw.send(b);
  EXPECT_EQ(backend->calls, 2);

  Gateway cold(mock_config(), backend, fast_options());
  cold.send(b, {false});
  cold.send(b, {false});
  EXPECT_EQ(backend->calls, 4);
}

TEST(Cache, SingleBytePerturbationsChangeTheKey) {
  std::mt19937_64 rng(8);
  const RasterImage img = vat::test::random_rgb(12, 12, rng);
  auto backend = std::make_shared<CountingBackend>();
  Gateway gw(mock_config(), backend, fast_options());
  const std::string base = gw.key_for(ChatRequest::from_bundle(bundle_for(img)));
  std::set<std::string> seen{base};
  for (std::size_t i = 0; i < 20; ++i) {
    RasterImage p = img;
    p.mutable_pixels()[i * 7 % p.sample_count()] ^= 1;
    seen.insert(gw.key_for(ChatRequest::from_bundle(bundle_for(p))));
  }
  seen.insert(gw.key_for(ChatRequest::from_bundle(bundle_for(img, "How many!"))));
  EXPECT_EQ(seen.size(), 22u);

  ModelConfig other = mock_config();
  other.max_output_tokens = 1023;
  Gateway gw2(other, backend, fast_options());
  EXPECT_NE(gw2.key_for(ChatRequest::from_bundle(bundle_for(img))), base);

  PromptBundle annotated = bundle_for(img);
  std::get<ImagePart>(annotated.parts[1]).annotations["blocks"] = 3;
  EXPECT_NE(gw.key_for(ChatRequest::from_bundle(annotated)), base);
}

TEST(Retry, TransientFailuresAreRetried) {
  auto backend = std::make_shared<CountingBackend>();
  backend->fail_first = 3;
  Gateway gw(mock_config(), backend, fast_options());
  std::mt19937_64 rng(1);
  EXPECT_NO_THROW(gw.send(bundle_for(vat::test::random_gray(5, 5, rng))));
  EXPECT_EQ(backend->calls, 4);
  EXPECT_EQ(gw.stats().retries, 3u);

  auto always = std::make_shared<CountingBackend>();
  always->fail_first = 100;
  Gateway gw2(mock_config(), always, fast_options());
  EXPECT_THROW(gw2.send(bundle_for(vat::test::random_gray(5, 5, rng))), GatewayError);
  EXPECT_EQ(always->calls, 5);
}

TEST(Retry, AuthErrorsAreNot) {
  auto backend = std::make_shared<CountingBackend>();
  backend->auth_fail = true;
  Gateway gw(mock_config(), backend, fast_options());
  std::mt19937_64 rng(1);
  EXPECT_THROW(gw.send(bundle_for(vat::test::random_gray(5, 5, rng))), AuthError);
  EXPECT_EQ(backend->calls, 1);
}

TEST(Config, Validation) {
  ModelConfig c = mock_config();
  EXPECT_NO_THROW(c.validate());
  c.temperature = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = mock_config();
  c.top_logprobs = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(load_backend_spec("bogus"), ConfigError);
  EXPECT_THROW(load_backend_spec("mock:/nonexistent.yaml"), ConfigError);

  vat::test::TempDir dir;
  write_file(dir / "live.yaml",
             "base_url: http://127.0.0.1:1/v1\nmodel: m1\napi_key_env: MY_KEY\n"
             "temperature: 0\nreasoning: {reasoning_effort: medium, budget: 128}\nlogprobs: true\n");
  const ModelConfig live = load_backend_spec("live:" + (dir / "live.yaml").string());
  ASSERT_TRUE(live.is_live());
  EXPECT_EQ(live.model_name(), "m1");
  EXPECT_EQ(live.reasoning_control["reasoning_effort"], "medium");
  EXPECT_EQ(live.reasoning_control["budget"], 128);
  EXPECT_TRUE(live.request_logprobs);
}

TEST(RateLimit, SpacesRequests) {
  RateLimiter limiter(600.0);  // 10 per second, burst of 10
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 13; ++i) limiter.acquire();
  EXPECT_GE(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(250));
}

TEST(Mock, RulesConditionsAndTurns) {
  auto mock = mock_from(R"y(
rules:
  - when: {has_abstract: true}
    respond: "ANSWER: (A)"
  - when: {turn: 1}
    respond: "second"
  - when: {text_contains: "hello", max_images: 0}
    respond: "hi"
default: "ANSWER: (B)"
usage: {input: 7, output: 3}
)y");
  std::mt19937_64 rng(1);
  const RasterImage img = vat::test::random_gray(6, 6, rng);
  const std::vector<std::shared_ptr<const EncodedImage>> imgs{encode_for_prompt(img)};
  const std::vector<VisualAbstract> abs{abstract_image(img, AbstractStyle::Canny)};
  const ModelConfig cfg = mock_config();
  EXPECT_EQ(mock->complete(ChatRequest::from_bundle(build_prompt("q", imgs, PromptMode::VAT, abs)), cfg).text,
            "ANSWER: (A)");
  const ModelResponse std_r = mock->complete(ChatRequest::from_bundle(build_prompt("q", imgs, PromptMode::Standard)), cfg);
  EXPECT_EQ(std_r.text, "ANSWER: (B)");
  EXPECT_EQ(std_r.usage, (TokenUsage{7, 3}));

  ChatRequest convo;
  convo.messages.push_back({ChatRole::User, {TextPart{"hello", PartRole::Question}}});
  EXPECT_EQ(mock->complete(convo, cfg).text, "hi");
  convo.messages.push_back({ChatRole::Assistant, {TextPart{"x", PartRole::Context}}});
  EXPECT_EQ(mock->complete(convo, cfg).text, "second");

  auto strict = mock_from("rules:\n  - when: {min_images: 5}\n    respond: x\n");
  EXPECT_THROW(strict->complete(convo, cfg), ScriptError);
  EXPECT_THROW(MockBackend::parse_script("rules: [{when: {bogus: 1}, respond: x}]"), ScriptError);
  EXPECT_THROW(MockBackend::parse_script("rules: [{respond: x, bernoulli: {p: 2, correct: a, wrong: b}}]"),
               ScriptError);
  EXPECT_THROW(MockBackend::parse_script("- not a map"), ScriptError);
}

TEST(Mock, BernoulliIsSeededAndCalibrated) {
  const std::string script = "seed: 7\nrules:\n  - bernoulli: {p: 0.3, correct: yes, wrong: no}\n";
  auto a = mock_from(script);
  auto b = mock_from(script);
  const ModelConfig cfg = mock_config();
  int hits = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    ChatRequest req;
    req.messages.push_back({ChatRole::User, {TextPart{"q" + std::to_string(i), PartRole::Question}}});
    const auto ra = a->complete(req, cfg).text;
    EXPECT_EQ(ra, b->complete(req, cfg).text);
    hits += ra == "yes";
  }
  EXPECT_NEAR(hits / static_cast<double>(n), 0.3, 0.03);
}

TEST(Mock, LogprobsFollowAnnotations) {
  auto mock = mock_from(R"y(
rules:
  - respond: "ANSWER: (A)"
    logprob: {token: A, base: -2.0, terms: {abstract_gt_blocks: 0.25, blocks: 0.5}}
)y");
  ModelConfig cfg = mock_config();
  cfg.request_logprobs = true;
  std::mt19937_64 rng(1);
  ImagePart part{encode_for_prompt(vat::test::random_gray(4, 4, rng)), PartRole::Composite,
                 {{"abstract_gt_blocks", 2.0}, {"blocks", 1.0}, {"other", 9.0}}};
  const PromptBundle b = build_single_prompt("q", {part}, PromptMode::VAT);
  const ModelResponse r = mock->complete(ChatRequest::from_bundle(b), cfg);
  ASSERT_TRUE(r.logprobs);
  std::vector<std::string> tokens;
  for (const auto& t : *r.logprobs) tokens.push_back(t.token);
  EXPECT_EQ(tokens, MockBackend::tokenize("ANSWER: (A)"));
  EXPECT_EQ(tokens, (std::vector<std::string>{"ANSWER", ":", " ", "(", "A", ")"}));
  EXPECT_DOUBLE_EQ((*r.logprobs)[4].logprob, -2.0 + 0.5 + 0.5);

  cfg.request_logprobs = false;
  EXPECT_FALSE(mock->complete(ChatRequest::from_bundle(b), cfg).logprobs);
}

TEST(Mock, FileIdentityIncludesSeedOverride) {
  vat::test::TempDir dir;
  write_file(dir / "s.yaml", "default: x\n");
  const auto plain = MockBackend::from_file(dir / "s.yaml");
  const auto seeded = MockBackend::from_file(dir / "s.yaml", 3);
  EXPECT_EQ(plain->identity(), "mock:" + sha256_hex("default: x\n"));
  EXPECT_EQ(seeded->identity(), plain->identity() + ":seed=3");
  ModelConfig cfg;
  cfg.backend = MockBackendConfig{dir / "s.yaml", 3};
  EXPECT_EQ(backend_identity(cfg), seeded->identity());
}

TEST(Response, JsonRoundTrip) {
  ModelResponse r{"txt", {3, 4}, 12.5, std::vector<TokenLogprob>{{"a", -0.5, {{"a", -0.5}, {"b", -1.0}}}}, false};
  EXPECT_EQ(response_from_json(to_json(r)), r);
  r.logprobs.reset();
  EXPECT_EQ(response_from_json(to_json(r)), r);
}
