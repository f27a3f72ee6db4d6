#include <benchmark/benchmark.h>

#include "amdp/env_suite.hpp"
#include "amdp/mirror_geometry.hpp"
#include "amdp/policy_eval.hpp"
#include "amdp/spmd.hpp"

using namespace amdp;

namespace {

TabularAmdp sized_instance(int n_states, int n_actions) {
    EnvSpec spec;
    spec.family = EnvSpec::Family::random_dirichlet;
    spec.n_states = n_states;
    spec.n_actions = n_actions;
    spec.seed = 99;
    return generate(spec).mdp;
}

void BM_DifferentialValues(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const TabularAmdp mdp = sized_instance(n, 4);
    const auto pi = StochasticPolicy::uniform(n, 4);
    const auto h = RegularizerSpec::negative_entropy(1.0);
    for (auto _ : state) {
        auto dv = differential_values(mdp, pi, h);
        benchmark::DoNotOptimize(dv.rho);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DifferentialValues)->RangeMultiplier(2)->Range(4, 64)->Complexity();

void BM_ActorProxClosedForm(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng = make_rng(1);
    ProxProblem p;
    p.q_row = Vector(n);
    for (int i = 0; i < n; ++i) p.q_row[i] = 2.0 * uniform01(rng) - 1.0;
    p.prev_policy_row = random_simplex_point(n, rng);
    p.eta = 0.5;
    p.regularizer = RegularizerSpec::negative_entropy(1.0);
    for (auto _ : state) {
        auto out = actor_prox_closed_form(p);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(BM_ActorProxClosedForm)->Arg(2)->Arg(8)->Arg(32);

void BM_ActorProxNumeric(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng = make_rng(2);
    ProxProblem p;
    p.q_row = Vector(n);
    for (int i = 0; i < n; ++i) p.q_row[i] = 2.0 * uniform01(rng) - 1.0;
    p.prev_policy_row = random_simplex_point(n, rng);
    p.eta = 0.5;
    p.regularizer = RegularizerSpec::negative_entropy(1.0);
    for (auto _ : state) {
        auto out = actor_prox_numeric(p, BregmanGeometry::kl());
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(BM_ActorProxNumeric)->Arg(2)->Arg(8)->Arg(32);

void BM_ContractionCoefficient(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const TabularAmdp mdp = sized_instance(n, 4);
    const auto pi = StochasticPolicy::uniform(n, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(contraction_coefficient(mdp, pi, 1));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ContractionCoefficient)->RangeMultiplier(2)->Range(4, 16)->Complexity();

void BM_SpmdIteration(benchmark::State& state) {
    const TabularAmdp mdp = sized_instance(8, 4);
    const auto h = RegularizerSpec::negative_entropy(1.0);
    StepSchedule schedule;
    schedule.kind = StepSchedule::Kind::inv_mu_k;
    SpmdOptions options;
    options.reference = reference_solution(mdp, h, BregmanGeometry::kl());
    options.record_trace = false;
    for (auto _ : state) {
        auto result = run_spmd(mdp, h, BregmanGeometry::kl(), schedule, CriticSpec{}, 10, 0,
                               options);
        benchmark::DoNotOptimize(result.first);
    }
}
BENCHMARK(BM_SpmdIteration)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
