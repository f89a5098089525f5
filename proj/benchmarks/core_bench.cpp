#include <random>

#include <benchmark/benchmark.h>

#include "goxn/energy_model.hpp"
#include "goxn/loadgen.hpp"
#include "goxn/metrics.hpp"
#include "goxn/simenv.hpp"

using namespace goxn;

static void BM_IncreaseOverWindow(benchmark::State& state) {
    MetricSeries s;
    s.metric_name = "x_total";
    std::mt19937_64 rng(1);
    double v = 0.0;
    for (int i = 0; i < state.range(0); ++i) {
        v = rng() % 50 == 0 ? 0.0 : v + static_cast<double>(rng() % 100);
        s.samples.push_back({static_cast<TimestampMs>(i) * 5000, v});
    }
    const TimeWindow w{0, static_cast<TimestampMs>(state.range(0)) * 5000};
    for (auto _ : state) benchmark::DoNotOptimize(increase_over_window(s, w));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IncreaseOverWindow)->Arg(12)->Arg(720)->Arg(17280);

static void BM_AggregateServices(benchmark::State& state) {
    std::vector<ContainerUsage> usages;
    std::mt19937_64 rng(2);
    for (int i = 0; i < state.range(0); ++i) {
        ContainerUsage u;
        u.container_id = "pod-" + std::to_string(i) + "/c";
        u.service = "svc" + std::to_string(i % 20);
        u.compute_joules = static_cast<double>(rng() % 10000);
        u.network_bytes = rng() % 1'000'000'000;
        u.storage_bytes = rng() % 1'000'000'000;
        u.window = {0, 60000};
        usages.push_back(std::move(u));
    }
    const auto f = EnergyIntensityFactors::defaults();
    for (auto _ : state) benchmark::DoNotOptimize(aggregate_services(usages, f));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AggregateServices)->Arg(10)->Arg(1000);

static void BM_SimHandleRequest(benchmark::State& state) {
    sim::SimSettings settings;
    settings.trace_sampling_fraction = static_cast<double>(state.range(0)) / 100.0;
    sim::Simulator simulator(sim::TopologySpec::default_demo(), settings);
    TimestampMs t = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulator.handle_request(kRecommendationRoute));
        simulator.advance_to(++t);
    }
}
BENCHMARK(BM_SimHandleRequest)->Arg(1)->Arg(50);
BENCHMARK_MAIN();
