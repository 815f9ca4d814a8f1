// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support/test_support.hpp"
#include "vat/error.hpp"
#include "vat/harness.hpp"
#include "vat/money.hpp"

using namespace vat;
using nlohmann::json;

namespace {

EvalRecord rec(std::string task, std::string label, bool correct, PromptMode mode = PromptMode::Standard) {
  EvalRecord r;
  r.task_id = std::move(task);
  r.label = std::move(label);
  r.mode = mode;
  r.correct = correct;
  r.usage = {100, 10};
  return r;
}

constexpr std::string_view kScript =
    "seed: 1\n"
    "usage: {input: 1000, output: 50}\n"
    "rules:\n"
    "  - when: {has_abstract: true}\n"
    "    respond: \"The sketch shows one square.\\nANSWER: (A)\"\n"
    "default: \"ANSWER: (B)\"\n";

std::unique_ptr<Gateway> mock_gateway(const std::filesystem::path& script) {
  ModelConfig cfg;
  cfg.backend = MockBackendConfig{script, std::nullopt};
  return Gateway::create(cfg);
}

}  // namespace

// ---------------------------------------------------------------- manifest

TEST(Manifest, ParsesAllFieldForms) {
  const std::string text =
      R"({"id": "a", "benchmark": "blink", "category": "BLINK Count", "images": ["x.png", "/abs/y.png"],)"
      R"( "question": "Q", "ground_truth": "A", "options": {"A": "one", "B": "two"},)"
      R"( "gt_boxes": [[1, 2, 3, 4]], "grid_hint": [2, 3]})"
      "\n\n"
      R"({"id": 7, "benchmark": "cospace", "images": ["z.png", "w.png"], "question": "Q2", "ground_truth": "left",)"
      R"( "options": [["B", "x"], {"label": "A", "text": "y"}], "gt_boxes": [[], [[0, 0, 1, 1]]]})"
      "\n";
  const auto tasks = parse_manifest(text, "/base", false);
  ASSERT_EQ(tasks.size(), 2u);
  EXPECT_EQ(tasks[0].images[0], std::filesystem::path("/base/x.png"));
  EXPECT_EQ(tasks[0].images[1], std::filesystem::path("/abs/y.png"));
  EXPECT_EQ(tasks[0].options, (std::vector<OptionChoice>{{"A", "one"}, {"B", "two"}}));
  EXPECT_EQ(tasks[0].gt_boxes, (std::vector<std::vector<BoundingBox>>{{{1, 2, 3, 4}}}));
  EXPECT_EQ(tasks[0].grid_hint, (GridHint{2, 3}));
  EXPECT_EQ(tasks[1].id, "7");
  EXPECT_EQ(tasks[1].category, "");
  EXPECT_EQ(tasks[1].options[0].label, "B");
  EXPECT_TRUE(tasks[1].has_gt_boxes());

  for (const auto& t : tasks) EXPECT_EQ(task_from_json(to_json(t, "/base"), "/base"), t);
}

TEST(Manifest, ErrorsCarryLineAndField) {
  auto fails_with = [](std::string text, std::size_t line, std::string field) {
    try {
      parse_manifest(text, ".", false);
      ADD_FAILURE() << "no error for " << text;
    } catch (const SchemaError& e) {
      EXPECT_EQ(e.line(), line) << text;
      EXPECT_EQ(e.field(), field) << text;
    }
  };
  const std::string ok = R"({"id": "a", "benchmark": "b", "images": ["x"], "question": "q", "ground_truth": "A"})";
  fails_with("\n" + ok + "\n{oops\n", 3, "");
  fails_with(R"({"benchmark": "b", "images": ["x"], "question": "q", "ground_truth": "A"})", 1, "id");
  fails_with(R"({"id": "a", "benchmark": "b", "images": [], "question": "q", "ground_truth": "A"})", 1, "images");
  fails_with(R"({"id": "a", "benchmark": "b", "images": ["x"], "question": "q"})", 1, "ground_truth");
  fails_with(R"({"id": "a", "benchmark": "b", "images": ["x"], "question": "q", "ground_truth": "A", "gt_boxes": [[3, 3, 3, 9]]})",
             1, "gt_boxes");
  fails_with(R"({"id": "a", "benchmark": "b", "images": ["x"], "question": "q", "ground_truth": "A", "options": [["A", "1"], ["A", "2"]]})",
             1, "options");
  fails_with(R"({"id": "a", "benchmark": "b", "images": ["x"], "question": "q", "ground_truth": "A", "grid_hint": [0, 2]})",
             1, "grid_hint");
  fails_with(ok + "\n" + ok, 2, "id");

  EXPECT_THROW(parse_manifest(R"({"id": "a", "benchmark": "MME-RealWorld", "images": ["x"], "question": "q", "ground_truth": "A"})",
                              ".", false),
               UnsupportedBenchmark);
  EXPECT_THROW(parse_manifest(ok, "/definitely/not/here", true), MissingImage);
  EXPECT_THROW(load_manifest("/definitely/not/here.jsonl"), ConfigError);
}

TEST(Manifest, LoadsFromDisk) {
  vat::test::TempDir dir;
  const auto path = vat::test::write_manifest(dir.path(), 3, 24, 24, true);
  const auto tasks = load_manifest(path);
  ASSERT_EQ(tasks.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(tasks[2].images[0]));
  EXPECT_TRUE(tasks[0].has_gt_boxes());
}

// ---------------------------------------------------------------- scoring

TEST(Scoring, ExtractAnswerCorpus) {
  const std::vector<std::pair<std::string, std::string>> corpus{
      {"ANSWER: (A)", "A"},
      {"answer: (b)", "b"},
      {"ANSWER: A.", "A"},
      {"Let me think.\nANSWER: (C) three", "C"},
      {"**ANSWER:** (D)", "D"},
      {"ANSWER: **B**", "B"},
      {"Answer: left", "left"},
      {"ANSWER: (A) ... wait. ANSWER: (B)", "B"},
      {"ANSWER:\n\n(C)\n", "C"},
      {"  no marker here  ", "no marker here"},
      {"ANSWER: The image on the right.", "The image on the right"},
      {"ANSWER: `E`", "E"},
      {"", ""},
  };
  for (const auto& [text, want] : corpus) {
    const std::string got = extract_answer(text);
    EXPECT_EQ(got, want) << text;
    EXPECT_EQ(extract_answer(got), got) << "not idempotent on " << text;
  }
}

TEST(Scoring, NormalizeAndMatch) {
  EXPECT_EQ(normalize_answer("  (The   LEFT one).  "), "the left one");
  EXPECT_TRUE(f_correct("A", "(A)"));
  EXPECT_TRUE(f_correct("a", "A"));
  EXPECT_TRUE(f_correct("(A) one", "A"));
  EXPECT_FALSE(f_correct("Bat", "A"));
  EXPECT_FALSE(f_correct("B", "A"));
  EXPECT_TRUE(f_correct("the left image", "left"));
  EXPECT_TRUE(f_correct("left", "the left image"));
  EXPECT_FALSE(f_correct("", "left"));
  EXPECT_FALSE(f_correct("l", "left"));
  EXPECT_TRUE(f_correct("3", "3"));
  EXPECT_FALSE(f_correct("13", "3"));
}

TEST(Metrics, AccuracyAndPartitions) {
  std::vector<EvalRecord> four{rec("a", "s", true), rec("b", "s", true), rec("c", "s", true), rec("d", "s", false)};
  EXPECT_DOUBLE_EQ(accuracy(four), 0.75);
  EXPECT_THROW(accuracy(std::span<const EvalRecord>{}), EmptyRun);

  std::mt19937_64 rng(12);
  std::vector<EvalRecord> all;
  for (int i = 0; i < 97; ++i) all.push_back(rec("t" + std::to_string(i), "s", rng() % 3 != 0));
  const double whole = accuracy(all);
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t cut = 1 + rng() % (all.size() - 1);
    const std::span<const EvalRecord> s(all);
    const double weighted = (accuracy(s.first(cut)) * static_cast<double>(cut) +
                             accuracy(s.subspan(cut)) * static_cast<double>(all.size() - cut)) /
                            static_cast<double>(all.size());
    EXPECT_NEAR(weighted, whole, 1e-12);
  }
}

TEST(Metrics, PassAtKCurve) {
  std::vector<EvalRecord> trials;
  auto add = [&](std::string task, std::vector<bool> outcomes) {
    for (std::size_t t = 0; t < outcomes.size(); ++t) {
      EvalRecord r = rec(task, "vat#pass", outcomes[t]);
      r.trial = static_cast<int>(t);
      trials.push_back(r);
    }
  };
  add("a", {true, false, false});
  add("b", {false, false, true});
  add("c", {false, false, false});
  add("d", {false, true});  // aborted after two trials
  const auto curve = pass_at_k_curve(trials, 3);
  EXPECT_EQ(curve, (std::vector<double>{0.25, 0.5, 0.75}));
  EXPECT_THROW(pass_at_k_curve(trials, 0), std::invalid_argument);
}

// ---------------------------------------------------------------- money

TEST(Money, ParseAndFormat) {
  EXPECT_EQ(Money::parse("0.3").units(), 300'000'000'000);
  EXPECT_EQ(Money::parse("12").to_string(), "12");
  EXPECT_EQ(Money::parse("0.0000024").to_string(), "0.0000024");
  EXPECT_EQ(Money::parse("1.000000000001").to_string(), "1.000000000001");
  EXPECT_EQ(Money::from_units(0).to_string(), "0");
  EXPECT_THROW(Money::parse("0.0000000000001"), ConfigError);
  EXPECT_THROW(Money::parse("abc"), ConfigError);
  EXPECT_THROW(Money::parse("-1"), ConfigError);
  EXPECT_THROW(Money::parse("99999999999"), ConfigError);
}

TEST(Money, CostIsExactAndLinear) {
  const PriceTable prices = PriceTable::parse("m: {input_per_1m: 0.30, output_per_1m: 2.40}\n");
  const Money one = compute_cost({1000, 50}, prices, "m");
  // 1000 * 0.30 / 1e6 + 50 * 2.40 / 1e6 = 0.0003 + 0.00012
  EXPECT_EQ(one.to_string(), "0.00042");
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const TokenUsage a{static_cast<std::int64_t>(rng() % 1'000'000), static_cast<std::int64_t>(rng() % 100'000)};
    const TokenUsage b{static_cast<std::int64_t>(rng() % 1'000'000), static_cast<std::int64_t>(rng() % 100'000)};
    EXPECT_EQ(compute_cost(a + b, prices, "m"), compute_cost(a, prices, "m") + compute_cost(b, prices, "m"));
  }
  EXPECT_THROW(compute_cost({1, 1}, prices, "other"), UnknownModel);
  EXPECT_THROW(compute_cost({std::int64_t{1} << 62, 0}, prices, "m"), std::overflow_error);
  EXPECT_THROW(PriceTable::parse("m: {input_per_1m: x}"), ConfigError);

  const PriceTable json_prices = PriceTable::parse(R"({"m": {"input_per_1m": "0.30", "output_per_1m": 2.4}})");
  EXPECT_EQ(json_prices.at("m").input_micros_per_1m, 300'000);
  EXPECT_EQ(json_prices.at("m").output_micros_per_1m, 2'400'000);
}

// ---------------------------------------------------------------- records and reports

TEST(Records, JsonAndRunLogRoundTrip) {
  vat::test::TempDir dir;
  EvalRecord a = rec("t1", "vat@canny", true, PromptMode::VAT);
  a.styles = {"canny"};
  a.cost = Money::parse("0.00042");
  a.response_text = "ANSWER: (A)\n\"quoted\"";
  a.request_digest = std::string(64, 'a');
  EvalRecord b = rec("t2", "standard", false);
  b.error = "ScriptError: nope";
  b.cached = true;
  EXPECT_EQ(record_from_json(to_json(a)), a);
  {
    RunLog log(dir / "run.jsonl");
    log.append(a);
    log.append(b);
  }
  EXPECT_EQ(RunLog::read(dir / "run.jsonl"), (std::vector<EvalRecord>{a, b}));

  // An interrupted writer can leave a partial final line.
  std::string text = read_file(dir / "run.jsonl");
  write_file(dir / "run.jsonl", text + to_json(a).dump().substr(0, 20));
  EXPECT_EQ(RunLog::read(dir / "run.jsonl").size(), 2u);
}

TEST(Report, SummaryIsOrderIndependentAndRoundTrips) {
  std::vector<EvalRecord> records;
  for (int i = 0; i < 10; ++i) {
    records.push_back(rec("t" + std::to_string(i), "standard", i < 3));
    EvalRecord v = rec("t" + std::to_string(i), "vat@canny", i < 8, PromptMode::VAT);
    v.usage = {300, 12};
    v.cost = Money::from_units(5);
    records.push_back(v);
  }
  records.back().cached = true;
  const RunReport report = summarize(records);
  ASSERT_EQ(report.modes.size(), 2u);
  EXPECT_EQ(report.modes[0].label, "standard");
  EXPECT_DOUBLE_EQ(report.modes[1].accuracy, 0.8);
  EXPECT_NEAR(*report.modes[1].gain, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(report.modes[1].mean_input_tokens, 300.0);
  EXPECT_EQ(report.total_cost, Money::from_units(50));

  const RunReport uncached = summarize(records, {"standard", false});
  EXPECT_DOUBLE_EQ(uncached.find("vat@canny")->mean_input_tokens, 270.0);
  EXPECT_EQ(uncached.total_cost, Money::from_units(45));

  std::mt19937_64 rng(5);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(records.begin(), records.end(), rng);
    const RunReport again = summarize(records);
    EXPECT_EQ(again, report);
    EXPECT_EQ(again.to_json().dump(), report.to_json().dump());
    EXPECT_EQ(again.to_markdown(), report.to_markdown());
  }
  EXPECT_EQ(RunReport::from_json(report.to_json()), report);

  const std::string md = report.to_markdown();
  EXPECT_NE(md.find("| Mode | N | ACC | Gain | Input Tokens | Output Tokens | Sum Tokens | Cost | Errors |"),
            std::string::npos);
  EXPECT_NE(md.find("+0.5000"), std::string::npos);
  EXPECT_FALSE(summarize(records, {"missing", true}).modes[0].gain);
}

TEST(Report, PassAtKAndCurves) {
  std::vector<EvalRecord> records{rec("t", "standard", true)};
  for (int t = 0; t < 3; ++t) {
    EvalRecord r = rec("t", "vat@canny#pass", t == 2, PromptMode::VAT);
    r.trial = t;
    records.push_back(r);
  }
  RunReport report = summarize(records);
  ASSERT_EQ(report.pass_at_k.size(), 1u);
  EXPECT_EQ(report.pass_at_k[0].label, "vat@canny");
  EXPECT_EQ(report.pass_at_k[0].pass_at, (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_EQ(report.modes.size(), 1u);

  report.curves = {{"t,1", 0, -0.5, "gt-first"}, {"t,1", 1, 0.1, "gt-first"}};
  EXPECT_EQ(report.curves_csv(), "task_id,t,metric,order\n\"t,1\",0,-0.5,gt-first\n\"t,1\",1,0.1,gt-first\n");
  EXPECT_EQ(RunReport::from_json(report.to_json()), report);

  vat::test::TempDir dir;
  const ReportPaths paths = emit_report(report, dir.path());
  EXPECT_TRUE(std::filesystem::exists(paths.json));
  EXPECT_TRUE(std::filesystem::exists(paths.markdown));
  ASSERT_TRUE(paths.curves_csv);
  EXPECT_EQ(read_file(*paths.curves_csv), report.curves_csv());
}

// ---------------------------------------------------------------- evaluator

TEST(Evaluator, MockEndToEnd) {
  vat::test::TempDir dir;
  write_file(dir / "script.yaml", kScript);
  const auto tasks = load_manifest(vat::test::write_manifest(dir.path(), 12));
  auto gw = mock_gateway(dir / "script.yaml");

  auto prices = std::make_shared<PriceTable>();
  prices->set("mock", "0.30", "2.40");
  EvalOptions opts;
  opts.styles.styles = {AbstractStyle::Canny};
  opts.prices = prices;
  opts.parallelism = 4;
  std::size_t callbacks = 0;
  opts.on_record = [&](const EvalRecord&) { ++callbacks; };
  Evaluator ev(*gw, opts);
  const auto records = ev.run(tasks);
  ASSERT_EQ(records.size(), 24u);
  EXPECT_EQ(callbacks, 24u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].task_id, tasks[i / 2].id);
    EXPECT_EQ(records[i].label, i % 2 ? "vat@canny" : "standard");
    EXPECT_EQ(records[i].correct, i % 2 == 1);
    EXPECT_EQ(records[i].cost, Money::parse("0.00042"));
    EXPECT_FALSE(records[i].error);
  }
  const RunReport report = summarize(records);
  EXPECT_DOUBLE_EQ(report.find("vat@canny")->accuracy, 1.0);
  EXPECT_DOUBLE_EQ(*report.find("vat@canny")->gain, 1.0);
  Money sum;
  for (const auto& r : records) sum += r.cost;
  EXPECT_EQ(report.total_cost, sum);

  // Second pass is served from the cache and scores identically.
  const auto again = ev.run(tasks);
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_TRUE(again[i].cached);
    EXPECT_EQ(again[i].correct, records[i].correct);
  }
}

TEST(Evaluator, FailuresAreRecordedNotThrown) {
  vat::test::TempDir dir;
  write_file(dir / "script.yaml", "rules:\n  - when: {has_abstract: true}\n    respond: \"ANSWER: (A)\"\n");
  const auto tasks = load_manifest(vat::test::write_manifest(dir.path(), 3));
  auto gw = mock_gateway(dir / "script.yaml");
  EvalOptions opts;
  opts.styles.styles = {AbstractStyle::PhotoSketch};  // no sketcher configured
  opts.modes = {PromptMode::Standard, PromptMode::VAT};
  Evaluator ev(*gw, opts);
  const auto records = ev.run(tasks);
  ASSERT_EQ(records.size(), 6u);
  for (const auto& r : records) {
    ASSERT_TRUE(r.error);
    EXPECT_FALSE(r.correct);
  }
  EXPECT_NE(records[0].error->find("no mock rule"), std::string::npos);
  EXPECT_NE(records[1].error->find("sketcher"), std::string::npos);
  EXPECT_EQ(summarize(records).find("standard")->errors, 3u);

  auto prices = std::make_shared<PriceTable>();
  prices->set("other", "1", "1");
  opts.prices = prices;
  EXPECT_THROW(Evaluator(*gw, opts), UnknownModel);
}

TEST(Evaluator, PassAtKUsesFreshSamples) {
  vat::test::TempDir dir;
  write_file(dir / "script.yaml",
             "seed: 3\nrules:\n  - bernoulli: {p: 0.5, correct: \"ANSWER: (A)\", wrong: \"ANSWER: (B)\"}\n");
  const auto tasks = load_manifest(vat::test::write_manifest(dir.path(), 40));
  auto gw = mock_gateway(dir / "script.yaml");
  EvalOptions opts;
  opts.modes = {PromptMode::Standard};
  Evaluator ev(*gw, opts);
  const auto trials = ev.run_pass_at_k(tasks, PromptMode::Standard, 4);
  ASSERT_EQ(trials.size(), 160u);
  EXPECT_EQ(gw->stats().cache_hits, 0u);
  const auto curve = pass_at_k_curve(trials, 4);
  EXPECT_TRUE(std::is_sorted(curve.begin(), curve.end()));
  EXPECT_GT(curve[3], curve[0]);
  EXPECT_EQ(trials[0].label, "standard#pass");
}

// The fixture manifest repeats images, so several tasks send identical requests.
TEST(Evaluator, PassAtKIndependentOfParallelism) {
  vat::test::TempDir dir;
  write_file(dir / "script.yaml",
             "seed: 5\nrules:\n  - bernoulli: {p: 0.4, correct: \"ANSWER: (A)\", wrong: \"ANSWER: (B)\"}\n");
  const auto tasks = load_manifest(vat::test::write_manifest(dir.path(), 60));
  auto outcomes = [&](std::size_t parallelism) {
    auto gw = mock_gateway(dir / "script.yaml");
    EvalOptions opts;
    opts.modes = {PromptMode::Standard};
    opts.parallelism = parallelism;
    Evaluator ev(*gw, opts);
    std::vector<std::pair<std::string, bool>> out;
    for (const auto& r : ev.run_pass_at_k(tasks, PromptMode::Standard, 5)) {
      out.emplace_back(r.task_id + "#" + std::to_string(r.trial), r.correct);
    }
    return out;
  };
  const auto serial = outcomes(1);
  EXPECT_EQ(serial.size(), 300u);
  for (int rep = 0; rep < 5; ++rep) EXPECT_EQ(outcomes(16), serial);
}

TEST(Evaluator, CancelStopsEarly) {
  vat::test::TempDir dir;
  write_file(dir / "script.yaml", kScript);
  const auto tasks = load_manifest(vat::test::write_manifest(dir.path(), 8));
  auto gw = mock_gateway(dir / "script.yaml");
  std::atomic<bool> cancel{true};
  EvalOptions opts;
  opts.styles.styles = {AbstractStyle::Canny};
  opts.cancel = &cancel;
  Evaluator ev(*gw, opts);
  EXPECT_LT(ev.run(tasks).size(), 16u);
}

TEST(Styles, LabelsAndAutoSelection) {
  StyleChoice choice;
  EXPECT_EQ(variant_label(PromptMode::Standard, choice), "standard");
  EXPECT_EQ(variant_label(PromptMode::VAT, choice), "vat@opensketch");
  choice.styles = {AbstractStyle::Canny, AbstractStyle::Binary};
  EXPECT_EQ(variant_label(PromptMode::VATCoT, choice), "vat-cot@canny+binary");
  choice.auto_select = true;
  EXPECT_EQ(choice.label(), "auto");
  TaskInstance t;
  t.category = "CoSpace Dir-Rec";
  EXPECT_EQ(choice.for_task(t), (std::vector<AbstractStyle>{AbstractStyle::Contour}));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 8, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  parallel_for(0, 8, [](std::size_t) { FAIL(); });
}
