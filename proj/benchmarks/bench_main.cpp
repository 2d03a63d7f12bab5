#include <vector>

#include <benchmark/benchmark.h>

#include "semac/env.hpp"
#include "semac/mann_whitney.hpp"
#include "semac/npm.hpp"
#include "semac/teacher.hpp"
#include "semac/train.hpp"

using namespace semac;

namespace {

std::vector<EnvState> random_states(int L, int n, Rng& rng) {
    std::vector<EnvState> out;
    for (int i = 0; i < n; ++i) {
        EnvState s;
        for (int u = 0; u < L; ++u) s.buffers.push_back(static_cast<int>(rng.uniform_index(4)));
        s.b0 = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(L) + 2));
        out.push_back(s);
    }
    return out;
}

void BM_PipelineForward(benchmark::State& st) {
    Rng rng(1);
    const auto p = NpmParams::random(3, NetworkShape{}, rng);
    const auto states = random_states(3, static_cast<int>(st.range(0)), rng);
    for (auto _ : st) benchmark::DoNotOptimize(pipeline_forward(p, states));
}
BENCHMARK(BM_PipelineForward)->Arg(1)->Arg(64);

void BM_PipelineBackward(benchmark::State& st) {
    Rng rng(2);
    const auto p = NpmParams::random(3, NetworkShape{}, rng);
    const auto states = random_states(3, 64, rng);
    ForwardCache cache;
    const auto q = pipeline_forward(p, states, &cache);
    for (auto _ : st) benchmark::DoNotOptimize(pipeline_backward(p, cache, q));
}
BENCHMARK(BM_PipelineBackward);

void BM_TdStep(benchmark::State& st) {
    Rng rng(3);
    Learner learner(NpmParams::random(3, NetworkShape{}, rng), TrainConfig{}, 3);
    Environment env(SimConfig::uniform(3, 0.3, 3, 0.01));
    auto streams = EpisodeStreams::make(3, "bench", 0);
    run_training_episode(env, learner, 0, 144, streams);
    for (auto _ : st) benchmark::DoNotOptimize(td_step(learner));
}
BENCHMARK(BM_TdStep);

void BM_TrainingEpisode(benchmark::State& st) {
    Rng rng(4);
    Learner learner(NpmParams::random(3, NetworkShape{}, rng), TrainConfig{}, 4);
    Environment env(SimConfig::uniform(3, 0.3, 3, 0.01));
    std::uint64_t n = 0;
    for (auto _ : st) {
        auto streams = EpisodeStreams::make(4, "bench", n++);
        benchmark::DoNotOptimize(run_training_episode(env, learner, 0, 144, streams));
    }
}
BENCHMARK(BM_TrainingEpisode)->Unit(benchmark::kMillisecond);

void BM_EnvSlot(benchmark::State& st) {
    Environment env(SimConfig::uniform(3, 0.3, 3, 0.01));
    Rng arrivals(5), erasure(6);
    const std::vector<Action> actions{Action::Transmit, Action::Silent, Action::Discard};
    for (auto _ : st) {
        env.step_arrivals(arrivals);
        benchmark::DoNotOptimize(env.apply_actions(actions, erasure));
    }
}
BENCHMARK(BM_EnvSlot);

void BM_ScriptedTeacher(benchmark::State& st) {
    ScriptedOracle oracle;
    EnvState s{{2, 1, 1}, 2};
    const auto qs = build_ue_queries(s);
    const auto bs = build_bs_query(s.b0, s.num_ues());
    const auto phi = default_instruction();
    for (auto _ : st) benchmark::DoNotOptimize(oracle.complete(phi.text, qs, bs));
}
BENCHMARK(BM_ScriptedTeacher);

void BM_MannWhitney(benchmark::State& st) {
    Rng rng(7);
    const auto n = static_cast<std::size_t>(st.range(0));
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = static_cast<double>(rng.uniform_index(13)) / 12.0;
    for (auto& x : b) x = static_cast<double>(rng.uniform_index(13)) / 12.0;
    for (auto _ : st) benchmark::DoNotOptimize(mann_whitney_one_sided(a, b));
}
BENCHMARK(BM_MannWhitney)->Arg(12)->Arg(36);

} // namespace
BENCHMARK_MAIN();
