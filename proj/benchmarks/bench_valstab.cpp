#include <random>

#include <benchmark/benchmark.h>

#include "valstab/correlation.hpp"
#include "valstab/experiments.hpp"
#include "valstab/scoring.hpp"
#include "valstab/stability.hpp"

using namespace valstab;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level(1, 6);
  std::vector<double> v(n);
  for (auto& x : v) x = level(rng);  // heavy ties, as in questionnaire data
  return v;
}

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = noise(n, 1), y = noise(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(spearman(x, y));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Spearman)->Arg(10)->Arg(60)->Arg(1000);

void BM_RankOrder(benchmark::State& state) {
  const auto contexts = static_cast<std::size_t>(state.range(0));
  std::vector<ScoreMatrix> ms;
  for (std::size_t c = 0; c < contexts; ++c) {
    ScoreMatrix m;
    m.context = "c" + std::to_string(c);
    for (std::size_t d = 0; d < kValueCount; ++d) m.dimensions.push_back("d" + std::to_string(d));
    for (std::size_t p = 0; p < 60; ++p) {
      m.participants.push_back("p" + std::to_string(p));
      m.rows.push_back(noise(kValueCount, c * 1000 + p));
    }
    ms.push_back(std::move(m));
  }
  for (auto _ : state) benchmark::DoNotOptimize(rank_order(ms).mean);
}
BENCHMARK(BM_RankOrder)->Arg(5)->Arg(14);

void BM_ScorePvq(benchmark::State& state) {
  const auto items = pvq_items(Gender::kFemale);
  std::mt19937_64 rng(3);
  std::vector<AnswerRecord> sheet;
  for (const auto& q : items) {
    AnswerRecord r;
    r.cell = {"m", 1, "joke", "p"};
    r.item = q.index;
    r.group = q.group;
    r.presented_order = "ABCDEF";
    const auto k = rng() % 6;
    r.chosen_letter = static_cast<char>('A' + k);
    r.chosen_code = static_cast<int>(q.scores[k]);
    sheet.push_back(r);
  }
  for (auto _ : state) benchmark::DoNotOptimize(score_pvq(sheet));
}
BENCHMARK(BM_ScorePvq);

// Whole pipeline with the scripted backend: conversations, administration,
// scoring and stability for the small fig2a preset.
void BM_ScriptedPipeline(benchmark::State& state) {
  Overrides o;
  o.scale = Scale::kSmall;
  const auto p = plan("fig2a", {scripted_config(ScriptedPolicy::kUniformRandom)}, o);
  for (auto _ : state) benchmark::DoNotOptimize(execute(p).backend_calls);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.answer_slots()));
}
BENCHMARK(BM_ScriptedPipeline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
