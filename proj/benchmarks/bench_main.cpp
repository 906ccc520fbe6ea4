/// @file bench_main.cpp
/// @brief Microbenchmarks for the hot pure functions and the mock sampler.

#include <benchmark/benchmark.h>

#include <random>

#include "kbound/evaluation/reports.hpp"
#include "kbound/gateway/mock_model.hpp"
#include "kbound/losses/objectives.hpp"
#include "kbound/probing/matching.hpp"
#include "kbound/util/rng.hpp"

namespace {

using namespace kbound;

losses::LossBatch random_batch(std::size_t n) {
  std::mt19937_64 rng(1);
  losses::LossBatch b(n);
  for (auto& p : b) {
    p.logp_w_policy = -10.0 * util::canonical(rng) - 0.01;
    p.logp_l_policy = -10.0 * util::canonical(rng) - 0.01;
    p.logp_w_ref = -10.0 * util::canonical(rng);
    p.logp_l_ref = -10.0 * util::canonical(rng);
    p.len_w = 4;
    p.len_l = 6;
  }
  return b;
}

void BM_Loss(benchmark::State& state) {
  const auto objective = static_cast<losses::Objective>(state.range(0));
  const auto batch = random_batch(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(losses::evaluate(objective, batch));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.SetLabel(std::string(losses::to_string(objective)));
}
BENCHMARK(BM_Loss)->ArgsProduct({{0, 1, 2, 3}, {64, 4096}});

void BM_ComputeMetrics(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::vector<evaluation::QuadrantOutcome> outs(static_cast<std::size_t>(state.range(0)));
  for (auto& o : outs) {
    o.mastery = util::bounded(rng, 2) ? Mastery::kKnown : Mastery::kUnknown;
    o.verdict = static_cast<evaluation::Verdict>(util::bounded(rng, 3));
    o.bucket = evaluation::bucket_for(o.mastery, o.verdict);
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluation::compute_metrics(outs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ComputeMetrics)->Arg(1000)->Arg(100000);

void BM_MatchAnswer(benchmark::State& state) {
  const probing::MatchPolicy policy;
  for (auto _ : state) {
    benchmark::DoNotOptimize(probing::match_answer("  The Brandenburg Gate, Berlin! ", "brandenburg gate berlin", policy));
  }
}
BENCHMARK(BM_MatchAnswer);

void BM_MockDraw(benchmark::State& state) {
  gateway::MockKnowledgeMap map;
  map.add("s", {"Oslo", 0.7, {{"Bergen", 2.0}, {"Trondheim", 1.0}}});
  gateway::ModelEndpoint e;
  e.name = "mock";
  gateway::MockModel model(e, map);
  const gateway::Query q{"s", "Which city?", "images/s.jpg"};
  int i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.draw(q, 1.0, 0, i++));
}
BENCHMARK(BM_MockDraw);

}  // namespace

BENCHMARK_MAIN();
