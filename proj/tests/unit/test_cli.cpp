// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "../../tools/src/cli.hpp"
#include "support/test_support.hpp"
#include "vat/harness.hpp"

using namespace vat;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, std::atomic<bool>* cancel = nullptr) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err, cancel);
  return {code, out.str(), err.str()};
}

std::string fixture(std::string_view name) { return (vat::test::fixture_dir() / name).string(); }

std::size_t lines_in(const std::filesystem::path& p) {
  const std::string s = read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  const Result r = run({"eval"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("--manifest"), std::string::npos);
  EXPECT_EQ(run({"render-template", "nope"}).code, cli::kUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, RenderTemplate) {
  const Result r = run({"render-template", "vat"});
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_EQ(r.out, read_file(vat::test::golden_dir() / "vat.txt"));
}

TEST(Cli, AbstractWritesPng) {
  vat::test::TempDir dir;
  save_png(vat::test::square_image(20, 20, 5, 5, 15, 15), dir / "in.png");
  for (std::string style : {"canny", "binary"}) {
    const auto out = (dir / (style + ".png")).string();
    const Result r = run({"abstract", "--style", style, (dir / "in.png").string(), out});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    const RasterImage img = load_image(out);
    EXPECT_EQ(img.width(), 20);
    EXPECT_EQ(img.channels(), 1);
  }
  EXPECT_EQ(run({"abstract", "--style", "opensketch", (dir / "in.png").string(), (dir / "o.png").string()}).code,
            cli::kEvalErrors);
  EXPECT_EQ(run({"abstract", "--style", "watercolor", (dir / "in.png").string(), (dir / "o.png").string()}).code,
            cli::kUsage);
}

TEST(Cli, EvalEndToEndAndReportRegeneration) {
  vat::test::TempDir dir;
  const auto manifest = vat::test::write_manifest(dir / "data", 6).string();
  const auto out = (dir / "out").string();
  const std::vector<std::string> args{"eval", "--backend", "mock:" + fixture("mock_vat.yaml"), "--manifest", manifest,
                                      "--modes", "standard,vat", "--style", "canny", "--out", out,
                                      "--prices", fixture("prices.yaml"), "--cache-dir", (dir / "cache").string()};
  const Result r = run(args);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("| vat@canny | 6 | 1.0000 | +1.0000 |"), std::string::npos) << r.out;
  EXPECT_EQ(lines_in(dir / "out" / "run.jsonl"), 12u);
  const std::string report_json = read_file(dir / "out" / "report.json");
  const std::string report_md = read_file(dir / "out" / "report.md");

  // A second run is served from the cache and produces the same reports.
  ASSERT_EQ(run(args).code, cli::kOk);
  EXPECT_EQ(lines_in(dir / "out" / "run.jsonl"), 12u);
  EXPECT_EQ(read_file(dir / "out" / "report.json"), report_json);
  EXPECT_EQ(read_file(dir / "out" / "report.md"), report_md);

  const Result rep = run({"report", "--run-log", (dir / "out" / "run.jsonl").string(), "--out",
                          (dir / "rebuilt").string()});
  ASSERT_EQ(rep.code, cli::kOk) << rep.err;
  EXPECT_EQ(read_file(dir / "rebuilt" / "report.json"), report_json);

  // Tasks t0 and t5 render the same image and question, so they share entries.
  const Result stats = run({"cache", "stats", "--cache-dir", (dir / "cache").string()});
  EXPECT_NE(stats.out.find("entries: 10"), std::string::npos) << stats.out;
  EXPECT_NE(run({"cache", "clear", "--cache-dir", (dir / "cache").string()}).out.find("removed 10"),
            std::string::npos);
}

TEST(Cli, EvalFailuresExitOne) {
  vat::test::TempDir dir;
  write_file(dir / "strict.yaml", "rules:\n  - when: {has_abstract: true}\n    respond: \"ANSWER: (A)\"\n");
  const auto manifest = vat::test::write_manifest(dir / "data", 2).string();
  const Result r = run({"eval", "--backend", "mock:" + (dir / "strict.yaml").string(), "--manifest", manifest,
                        "--style", "canny", "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, cli::kEvalErrors);
  EXPECT_NE(r.err.find("2 record(s) failed"), std::string::npos);
}

TEST(Cli, InterruptedRunExits130) {
  vat::test::TempDir dir;
  const auto manifest = vat::test::write_manifest(dir / "data", 2).string();
  std::atomic<bool> cancel{true};
  const Result r = run({"eval", "--backend", "mock:" + fixture("mock_vat.yaml"), "--manifest", manifest, "--style",
                        "canny", "--out", (dir / "out").string()},
                       &cancel);
  EXPECT_EQ(r.code, cli::kInterrupted);
}

TEST(Cli, DryRunAndLiveGuard) {
  vat::test::TempDir dir;
  const auto manifest = vat::test::write_manifest(dir / "data", 3).string();
  write_file(dir / "live.yaml", "base_url: http://127.0.0.1:1/v1\nmodel: gemini-2.5-flash\napi_key_env: VAT_CLI_TEST_KEY\n");
  unsetenv("VAT_CLI_TEST_KEY");
  const std::string backend = "live:" + (dir / "live.yaml").string();
  const Result dry = run({"eval", "--backend", backend, "--manifest", manifest, "--dry-run", "--prices",
                          fixture("prices.yaml"), "--out", (dir / "out").string()});
  ASSERT_EQ(dry.code, cli::kOk) << dry.err;
  EXPECT_NE(dry.out.find("estimate: 6 requests"), std::string::npos) << dry.out;
  EXPECT_NE(dry.out.find("worst-case cost"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "out"));

  EXPECT_EQ(run({"eval", "--backend", backend, "--manifest", manifest}).code, cli::kUsage);
  const Result nokey = run({"eval", "--backend", backend, "--manifest", manifest, "--live"});
  EXPECT_EQ(nokey.code, cli::kUsage);
  EXPECT_NE(nokey.err.find("VAT_CLI_TEST_KEY"), std::string::npos);
}

TEST(Cli, AblateRegionTrendAndSweep) {
  vat::test::TempDir dir;
  const auto manifest = vat::test::write_manifest(dir / "data", 3, 24, 24, true).string();
  const std::string backend = "mock:" + fixture("mock_logprob.yaml");
  const Result region = run({"ablate", "--backend", backend, "--manifest", manifest, "--style", "canny", "--out",
                             (dir / "region").string(), "--rand-gt-seeds", "2"});
  ASSERT_EQ(region.code, cli::kOk) << region.err;
  EXPECT_NE(region.out.find("| all-gt | 3 | 1.0000 |"), std::string::npos) << region.out;
  EXPECT_EQ(lines_in(dir / "region" / "run.jsonl"), 3u * 6u);

  const Result trend = run({"ablate", "--backend", backend, "--manifest", manifest, "--style", "canny", "--trend",
                            "gt-first,redundancy-first", "--out", (dir / "trend").string()});
  ASSERT_EQ(trend.code, cli::kOk) << trend.err;
  EXPECT_EQ(lines_in(dir / "trend" / "curves.csv"), 1u + 3u * 2u * 10u);

  const Result sweep = run({"ablate", "--backend", backend, "--manifest", manifest, "--kind", "format-sweep",
                            "--style", "canny", "--out", (dir / "sweep").string()});
  ASSERT_EQ(sweep.code, cli::kOk) << sweep.err;
  EXPECT_EQ(lines_in(dir / "sweep" / "run.jsonl"), 18u);

  EXPECT_EQ(run({"ablate", "--backend", backend, "--manifest", manifest, "--kind", "white-mask", "--trend",
                 "gt-first"})
                .code,
            cli::kUsage);
}

TEST(Cli, ReactWritesTrace) {
  vat::test::TempDir dir;
  const auto manifest = vat::test::write_manifest(dir / "data", 2).string();
  const Result r = run({"react", "--backend", "mock:" + fixture("mock_react.yaml"), "--manifest", manifest, "--out",
                        (dir / "out").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("tool invocations: 2"), std::string::npos) << r.out;
  EXPECT_EQ(lines_in(dir / "out" / "react_trace.jsonl"), 4u);
}

TEST(Cli, AblateComposeWritesFrames) {
  vat::test::TempDir dir;
  save_png(vat::test::square_image(24, 24, 3, 3, 12, 12), dir / "in.png");
  const Result r = run({"ablate-compose", "--image", (dir / "in.png").string(), "--style", "canny", "--grid", "2x2",
                        "--boxes", "0,0,12,12", "--order", "gt-first", "--out", (dir / "frames").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  for (int i = 0; i <= 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%02d.png", i);
    EXPECT_TRUE(std::filesystem::exists(dir / "frames" / name)) << name;
  }
}
