// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "vat/abstraction.hpp"
#include "vat/gateway.hpp"
#include "vat/prompt.hpp"
#include "vat/region.hpp"

namespace {

vat::RasterImage noise(int w, int h, int channels) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(w) * 31 + static_cast<std::uint64_t>(h));
  std::vector<vat::Sample> px(static_cast<std::size_t>(w) * h * channels);
  for (auto& p : px) p = static_cast<vat::Sample>(rng() & 0xff);
  return vat::RasterImage(w, h, channels, std::move(px));
}

void BM_Canny(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto img = noise(side, side, 1);
  for (auto _ : state) benchmark::DoNotOptimize(vat::canny(img));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Canny)->Arg(256)->Arg(512)->Arg(1024);

void BM_Otsu(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto img = noise(side, side, 1);
  for (auto _ : state) benchmark::DoNotOptimize(vat::otsu_binarize(img));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Otsu)->Arg(256)->Arg(1024);

void BM_ComposeTransition(benchmark::State& state) {
  const auto base = noise(512, 512, 3);
  const vat::VisualAbstract abs{vat::canny(vat::to_grayscale(base)).image, vat::AbstractStyle::Canny, "", "{}"};
  const auto grid = vat::make_grid(512, 512, 8, 8);
  std::vector<std::size_t> sel;
  for (std::size_t b = 0; b < grid.size(); b += 2) sel.push_back(b);
  for (auto _ : state) benchmark::DoNotOptimize(vat::compose_transition(base, abs, grid, sel));
}
BENCHMARK(BM_ComposeTransition);

void BM_CacheKey(benchmark::State& state) {
  const auto img = noise(512, 512, 3);
  const std::vector<std::shared_ptr<const vat::EncodedImage>> imgs{vat::encode_for_prompt(img)};
  const auto bundle = vat::build_prompt("Which is larger?", imgs, vat::PromptMode::Standard);
  vat::ModelConfig config;
  config.backend = vat::LiveBackendConfig{"https://example.invalid/v1", "bench", "OPENAI_API_KEY", true, "max_tokens"};
  for (auto _ : state) benchmark::DoNotOptimize(vat::cache_key(bundle, config));
}
BENCHMARK(BM_CacheKey);

}  // namespace

BENCHMARK_MAIN();
