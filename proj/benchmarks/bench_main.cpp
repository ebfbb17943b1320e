// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "sopforge/datafree.hpp"
#include "sopforge/metrics.hpp"
#include "sopforge/store.hpp"

using namespace sopforge;

namespace {

TrainConfig chain_config(int agents) {
  TrainConfig cfg;
  if (agents == 3) cfg.chain = {AgentId::TextToImage, AgentId::ImageToImage, AgentId::ImageToVideo};
  return cfg;
}

TrainSample sample(const TrainConfig& cfg) { return gradient_check_sample(cfg); }

void BM_ForwardChain(benchmark::State& st) {
  const TrainConfig cfg = chain_config(static_cast<int>(st.range(0)));
  const TrainState s = initial_state(cfg);
  const TrainSample d = sample(cfg);
  for (auto _ : st) benchmark::DoNotOptimize(forward_chain(s.params, s.modulation, d.prompt, cfg).output());
}
BENCHMARK(BM_ForwardChain)->Arg(2)->Arg(3);

void BM_ForwardBackward(benchmark::State& st) {
  const TrainConfig cfg = chain_config(static_cast<int>(st.range(0)));
  const TrainState s = initial_state(cfg);
  const TrainSample d = sample(cfg);
  for (auto _ : st) {
    const ChainCache cache = forward_chain(s.params, s.modulation, d.prompt, cfg);
    benchmark::DoNotOptimize(backward_chain(cache, d.target));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(2)->Arg(3);

void BM_TrainEpoch16(benchmark::State& st) {
  TrainConfig cfg;
  cfg.epochs = 1;
  std::vector<TrainSample> data;
  for (const auto& p : synthesize_prompts(cfg.seed, 16)) {
    data.push_back({enhance_prompt(p), oracle_render({prompt_vector(p.text()), false}, cfg.t_frames)});
  }
  const TrainState s = initial_state(cfg);
  for (auto _ : st) benchmark::DoNotOptimize(train(data, cfg, s).state);
}
BENCHMARK(BM_TrainEpoch16)->Unit(benchmark::kMillisecond);

void BM_OracleRender(benchmark::State& st) {
  const OracleParams p{prompt_vector("a red blob drifting right"), false};
  for (auto _ : st) benchmark::DoNotOptimize(oracle_render(p, static_cast<std::size_t>(st.range(0))));
}
BENCHMARK(BM_OracleRender)->Arg(6)->Arg(64);

void BM_GenerateCandidates(benchmark::State& st) {
  const DataFreeConfig cfg;
  const TrainState s = initial_state(cfg.train_cfg);
  const auto prompt = enhance_prompt(TextPrompt("a red blob drifting right"));
  for (auto _ : st) benchmark::DoNotOptimize(generate_candidates(s, prompt, cfg, 1, "bench"));
}
BENCHMARK(BM_GenerateCandidates);

void BM_VideoFeature(benchmark::State& st) {
  const Video v = oracle_render({prompt_vector("blob"), false}, 6);
  for (auto _ : st) benchmark::DoNotOptimize(video_feature(v));
}
BENCHMARK(BM_VideoFeature);

void BM_TvidEncodeDecode(benchmark::State& st) {
  const Video v = oracle_render({prompt_vector("blob"), false}, static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(decode_tvid(encode_tvid(v)));
  st.SetBytesProcessed(static_cast<std::int64_t>(st.iterations()) *
                       static_cast<std::int64_t>(encode_tvid(v).size()));
}
BENCHMARK(BM_TvidEncodeDecode)->Arg(6)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
