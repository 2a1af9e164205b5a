/*
 Copyright 2026 The cbfqp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "cbfqp/analysis.hpp"
#include "cbfqp/oracle.hpp"
#include "cbfqp/scenario.hpp"
#include "cbfqp/simulate.hpp"
#include "cbfqp/stability.hpp"

namespace {

using namespace cbfqp;

const char* const kScenarios[] = {"fig1", "deadlock2d", "filter2d"};

QpController load(int which) {
    return make_controller(load_scenario(std::string(CBFQP_SCENARIO_DIR) + "/" + kScenarios[which] + ".scenario"));
}

std::vector<Vector> states(const QpController& qp, int which) {
    auto s = load_scenario(std::string(CBFQP_SCENARIO_DIR) + "/" + kScenarios[which] + ".scenario");
    return sample_safe_states(qp, s.sampling.lo, s.sampling.hi, 256, 7);
}

void BM_Solve(benchmark::State& state) {
    const auto qp = load(static_cast<int>(state.range(0)));
    const auto xs = states(qp, static_cast<int>(state.range(0)));
    std::size_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(qp.try_solve(xs[k++ % xs.size()]));
    }
    state.SetLabel(kScenarios[state.range(0)]);
}
BENCHMARK(BM_Solve)->DenseRange(0, 2);

void BM_FeasibilityCheck(benchmark::State& state) {
    const auto qp = load(static_cast<int>(state.range(0)));
    const auto xs = states(qp, static_cast<int>(state.range(0)));
    std::size_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(qp.check_feasibility(xs[k++ % xs.size()]));
    }
    state.SetLabel(kScenarios[state.range(0)]);
}
BENCHMARK(BM_FeasibilityCheck)->DenseRange(0, 2);

void BM_OracleExact(benchmark::State& state) {
    const auto qp = load(static_cast<int>(state.range(0)));
    const auto xs = states(qp, static_cast<int>(state.range(0)));
    std::size_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(oracle_solve_exact(qp, xs[k++ % xs.size()]));
    }
    state.SetLabel(kScenarios[state.range(0)]);
}
BENCHMARK(BM_OracleExact)->DenseRange(0, 2);

void BM_ClassifyEquilibria(benchmark::State& state) {
    const auto qp = load(static_cast<int>(state.range(0)));
    auto s = load_scenario(std::string(CBFQP_SCENARIO_DIR) + "/" + kScenarios[state.range(0)] + ".scenario");
    std::vector<EquilibriumReport> reps;
    for (const auto& set : analyze_equilibria(qp, s.search).boundary) {
        for (const auto& r : set.equilibria) {
            if (r.validated_in_S_A) reps.push_back(r);
        }
    }
    if (reps.empty()) {
        state.SkipWithError("no equilibria");
        return;
    }
    std::size_t k = 0;
    for (auto _ : state) {
        const auto& r = reps[k++ % reps.size()];
        benchmark::DoNotOptimize(classify(qp, r.x_e, r.lambda_e, r.active));
    }
    state.SetLabel(kScenarios[state.range(0)]);
}
BENCHMARK(BM_ClassifyEquilibria)->DenseRange(0, 2);

void BM_SimulateFig1(benchmark::State& state) {
    const auto qp = load(0);
    auto s = load_scenario(std::string(CBFQP_SCENARIO_DIR) + "/fig1.scenario");
    const Vector x0 = s.initial_states.front();
    IntegrationSettings st;
    st.dt = 1e-3;
    st.t_final = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate(qp, x0, st));
    }
}
BENCHMARK(BM_SimulateFig1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
