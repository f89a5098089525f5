#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "goxn/analysis.hpp"
#include "goxn/error.hpp"
#include "goxn/runner.hpp"
#include "goxn/simenv.hpp"
#include "temp_dir.hpp"

using namespace goxn;
using goxn::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string run_scenario(const std::string& key, const std::string& out, double duration = 60) {
    sim::SimEnvironment env(sim::TopologySpec::default_demo(), sim::SimSettings{});
    CatalogOptions o;
    o.output_dir = out;
    o.duration = duration;
    const auto spec = catalog_spec(key, o);
    const auto report = run_experiment(spec, env);
    if (report.status != RunStatus::complete) throw std::runtime_error(report.error);
    return spec.run_dir();
}

ProcessedRun synthetic(const std::string& scenario, double scale) {
    ProcessedRun r;
    r.scenario_key = scenario;
    r.breakdowns = {ServiceEnergyBreakdown::from_components("a", 10 * scale, 1, 1),
                    ServiceEnergyBreakdown::from_components("b", 5, 5 * scale, 0)};
    return r;
}

}  // namespace

TEST(MeanCi, HandValues) {
    const auto [m0, h0] = mean_ci({5, 5, 5});
    EXPECT_EQ(m0, 5.0);
    EXPECT_EQ(h0, 0.0);
    // t(0.975, 2) = 4.303 from tables; s = 1, n = 3.
    const auto [m, h] = mean_ci({1, 2, 3});
    EXPECT_EQ(m, 2.0);
    EXPECT_NEAR(h, 4.303 / std::sqrt(3.0), 1e-3);
    EXPECT_NEAR(h, 2.484, 1e-3);
    EXPECT_THROW(mean_ci({1}), DomainError);
    EXPECT_THROW(mean_ci({1, 2}, 1.5), DomainError);
}

TEST(Process, WritesFourFilesByteStable) {
    TempDir tmp;
    const auto dir = run_scenario("tracing-high", tmp.str(), 30);
    const auto run = process_run(dir, ModelConfig{}, ServiceMap::defaults());
    for (const char* f : {kComputeCsv, kNetworkCsv, kStorageCsv}) EXPECT_TRUE(fs::exists(fs::path(dir) / f)) << f;
    const auto totals = fs::path(dir) / energy_totals_file("tracing-high");
    ASSERT_TRUE(fs::exists(totals));
    const auto first = slurp(totals);
    const auto first_compute = slurp(fs::path(dir) / kComputeCsv);
    process_run(dir, ModelConfig{}, ServiceMap::defaults());
    EXPECT_EQ(slurp(totals), first);
    EXPECT_EQ(slurp(fs::path(dir) / kComputeCsv), first_compute);
    EXPECT_EQ(first.substr(0, first.find('\n')),
              "service,compute_joules,network_joules,storage_joules,total_joules,share_compute,share_network,"
              "share_storage,compute_only_underestimation_pct,warnings");
    EXPECT_EQ(run.breakdowns.size(), 7u);

    const auto back = load_processed(dir);
    EXPECT_EQ(back.scenario_key, "tracing-high");
    ASSERT_EQ(back.breakdowns.size(), run.breakdowns.size());
    for (std::size_t i = 0; i < run.breakdowns.size(); ++i) EXPECT_EQ(back.breakdowns[i], run.breakdowns[i]);
}

TEST(Process, MissingReportAndEmptyStore) {
    TempDir tmp;
    EXPECT_THROW(process_run(tmp.str(), ModelConfig{}, ServiceMap::defaults()), IoError);
    RawStore empty;
    empty.window = {0, 1000};
    EXPECT_THROW(process_store("x", empty, ModelConfig{}, ServiceMap::defaults()), ValidationError);
}

TEST(Process, ConfigFilesLoad) {
    const auto cfg = ModelConfig::load(std::string(GOXN_SOURCE_DIR) + "/config/factors.yaml");
    EXPECT_EQ(cfg.factors, EnergyIntensityFactors::defaults());
    const auto map = ServiceMap::load(std::string(GOXN_SOURCE_DIR) + "/config/service_map.yaml");
    EXPECT_EQ(map.resolve({{"app", "cart"}}, "cart-0"), "cart");
    TempDir tmp;
    std::ofstream(tmp.path() / "f.yaml") << "network_kwh_per_gb: 0.1\nstorage: 1\n";
    EXPECT_THROW(ModelConfig::load(tmp.str("f.yaml")), SchemaError);
}

TEST(Compare, BaselineAlone) {
    const auto table = compare({synthetic("baseline", 1)}, "baseline");
    ASSERT_EQ(table.rows.size(), 2u);
    for (const auto& r : table.rows) EXPECT_EQ(r.delta_vs_baseline_pct, 0.0);
    EXPECT_THROW(compare({synthetic("x", 1)}, "baseline"), ValidationError);
    EXPECT_THROW(compare({synthetic("baseline", 1), synthetic("baseline", 2)}, "baseline"), ValidationError);
}

TEST(Compare, DeltaAndPermutationInvariance) {
    std::vector<ProcessedRun> runs = {synthetic("baseline", 1), synthetic("double", 2), synthetic("half", 0.5)};
    const auto reference = compare(runs, "baseline");
    const auto* a = reference.find("double", "a");
    ASSERT_NE(a, nullptr);
    EXPECT_NEAR(*a->delta_vs_baseline_pct, 100.0 * (22.0 - 12.0) / 12.0, 1e-12);
    EXPECT_EQ(reference.find("double", "b")->dominant, Component::network);
    std::sort(runs.begin(), runs.end(), [](const auto& x, const auto& y) { return x.scenario_key < y.scenario_key; });
    do {
        const auto t = compare(runs, "baseline");
        ASSERT_EQ(t.rows.size(), reference.rows.size());
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            EXPECT_EQ(t.rows[i].scenario, reference.rows[i].scenario);
            EXPECT_EQ(t.rows[i].breakdown, reference.rows[i].breakdown);
            EXPECT_EQ(t.rows[i].delta_vs_baseline_pct, reference.rows[i].delta_vs_baseline_pct);
        }
    } while (std::next_permutation(runs.begin(), runs.end(),
                                   [](const auto& x, const auto& y) { return x.scenario_key < y.scenario_key; }));
}

TEST(Compare, TracingRaisesSinkShareMonotonically) {
    TempDir tmp;
    std::vector<ProcessedRun> runs;
    for (const char* key : {"baseline", "tracing-low", "tracing-medium", "tracing-high"}) {
        runs.push_back(process_run(run_scenario(key, tmp.str()), ModelConfig{}, ServiceMap::defaults()));
    }
    const auto table = compare(runs, "baseline");
    double previous = -1.0;
    for (const char* key : {"baseline", "tracing-low", "tracing-medium", "tracing-high"}) {
        const auto* row = table.find(key, "otel-collector");
        ASSERT_NE(row, nullptr);
        const double aux = row->share_network + row->share_storage;
        EXPECT_GT(aux, previous) << key;
        previous = aux;
    }
    const auto path = tmp.str("comparison.csv");
    write_comparison_csv(table, path);
    const auto text = slurp(path);
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "scenario,service,compute_joules,network_joules,storage_joules,total_joules,share_compute,"
              "share_network,share_storage,delta_vs_baseline_pct,dominant,compute_only_underestimation_pct");
}

TEST(Plot, LongFormatRowCounts) {
    EXPECT_EQ(plot_data_rows(compare({synthetic("baseline", 1)}, "baseline")).size(), 6u);
    std::vector<ProcessedRun> runs;
    for (const auto& entry : scenario_catalog()) {
        ProcessedRun r;
        r.scenario_key = entry.key;
        for (const auto& svc : sim::TopologySpec::default_demo().services) {
            r.breakdowns.push_back(ServiceEnergyBreakdown::from_components(svc.name, 1, 2, 3));
        }
        runs.push_back(std::move(r));
    }
    const auto table = compare(runs, "baseline");
    const auto rows = plot_data_rows(table);
    EXPECT_EQ(rows.size(), 147u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"baseline", "cart", "compute", "1", "0.16666666666666666"}));
    TempDir tmp;
    emit_plot_data(table, tmp.str("plot.csv"));
    EXPECT_THROW(emit_plot_data(ComparisonTable{}, tmp.str("p2.csv")), ValidationError);
}
