// One line per acceptance criterion; nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "goxn/analysis.hpp"
#include "goxn/energy_model.hpp"
#include "goxn/metrics.hpp"
#include "goxn/runner.hpp"
#include "goxn/simenv.hpp"
#include "temp_dir.hpp"

using namespace goxn;
using goxn::testing::TempDir;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// A check returns an empty string on success, otherwise what went wrong.
struct Criterion {
    int id;
    std::string title;
    std::function<std::string()> check;
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

const ServiceEnergyBreakdown* find(const std::vector<ServiceEnergyBreakdown>& v, const std::string& service) {
    for (const auto& b : v) {
        if (b.service == service) return &b;
    }
    return nullptr;
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[fs::relative(e.path(), root).generic_string()] = {std::istreambuf_iterator<char>(in), {}};
    }
    return files;
}

int run_cli(const std::vector<std::string>& args, std::string& err_text) {
    std::ostringstream out, err;
    const int code = goxn::cli::run_cli(args, out, err);
    err_text = err.str();
    return code;
}

// --- 1 -----------------------------------------------------------------------------

std::string counter_oracle() {
    const auto t0 = Clock::now();
    std::size_t cases = 0;
    for (int len = 0; len <= 6; ++len) {
        const int total = 1 << (2 * len);
        for (int code = 0; code < total; ++code) {
            std::vector<double> v;
            for (int i = 0, c = code; i < len; ++i, c >>= 2) v.push_back(c & 3);
            double expected = 0.0;
            for (std::size_t i = 1; i < v.size(); ++i) expected += v[i] >= v[i - 1] ? v[i] - v[i - 1] : v[i];
            MetricSeries s;
            s.metric_name = "x_total";
            for (std::size_t i = 0; i < v.size(); ++i) s.samples.push_back({static_cast<TimestampMs>(i) * 1000, v[i]});
            const TimeWindow w{0, std::max<TimestampMs>(1, static_cast<TimestampMs>(len) * 1000)};
            const double got = increase_over_window(s, w);
            if (got != expected) return "case " + std::to_string(code) + " len " + std::to_string(len) + ": " + fmt(got);
            ++cases;
        }
    }
    const double elapsed = seconds_since(t0);
    if (cases < 4096) return "only " + std::to_string(cases) + " cases";
    if (elapsed >= 5.0) return "took " + fmt(elapsed) + " s";
    return "";
}

// --- 2 -----------------------------------------------------------------------------

std::string conservation() {
    // Dyadic factors and compute values keep every sum exact in binary floating point.
    EnergyIntensityFactors f;
    f.network_j_per_byte = std::ldexp(1.0, -12);
    f.storage_j_per_byte = std::ldexp(1.0, -16);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> joules(0.0, 1000.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<ContainerUsage> usages;
        const int n = 1 + static_cast<int>(rng() % 16);
        for (int i = 0; i < n; ++i) {
            ContainerUsage u;
            u.container_id = "pod-" + std::to_string(i) + "/c";
            u.pod = "pod-" + std::to_string(i);
            u.service = "svc" + std::to_string(rng() % 5);
            u.compute_joules = static_cast<double>(rng() % 100000) / 16.0;
            u.network_bytes = rng() % (1ull << 30);
            u.storage_bytes = rng() % (1ull << 30);
            u.window = {0, 60000};
            usages.push_back(std::move(u));
        }
        double containers = 0.0;
        for (const auto& u : usages) containers += container_breakdown(u, f).total_joules;
        double services = 0.0;
        for (const auto& b : aggregate_services(usages, f)) services += b.total_joules;
        if (services != containers) return "trial " + std::to_string(trial) + ": " + fmt(services) + " != " + fmt(containers);

        // Shares with arbitrary values and the shipped factors.
        for (auto& u : usages) u.compute_joules = joules(rng);
        for (const auto& b : aggregate_services(usages, EnergyIntensityFactors::defaults())) {
            const double sum = b.share_compute + b.share_network + b.share_storage;
            if (b.total_joules > 0.0 && std::fabs(sum - 1.0) > 1e-12) return "shares sum to " + fmt(sum);
        }
    }
    return "";
}

// --- 3 -----------------------------------------------------------------------------

std::string pipeline_vs_ledger() {
    const auto t0 = Clock::now();
    const auto factors = EnergyIntensityFactors::defaults();
    for (const double settle : {0.0, 2.5}) {
        TempDir tmp;
        sim::SimSettings settings;
        settings.scrape_interval_s = 5.0;
        sim::SimEnvironment env(sim::TopologySpec::default_demo(), settings);
        CatalogOptions o;
        o.output_dir = tmp.str();
        auto spec = catalog_spec("baseline", o);
        spec.settle_seconds = settle;
        const auto report = run_experiment(spec, env);
        if (report.status != RunStatus::complete) return report.error;
        const auto run = process_run(spec.run_dir(), ModelConfig{}, ServiceMap::defaults());
        const auto ledger = env.simulator().ledger_breakdowns(*report.window, factors);
        if (run.breakdowns.size() != ledger.size()) return "service sets differ";

        const bool aligned = report.window->start % 5000 == 0;
        // Largest accrual of any single scrape interval, per service and component.
        std::map<std::string, std::array<double, 3>> bound;
        for (TimestampMs t = 0; t + 5000 <= env.simulator().now(); t += 5000) {
            for (const auto& b : env.simulator().ledger_breakdowns({t, t + 5000}, factors)) {
                auto& m = bound[b.service];
                m[0] = std::max(m[0], b.compute_joules);
                m[1] = std::max(m[1], b.network_joules);
                m[2] = std::max(m[2], b.storage_joules);
            }
        }
        for (const auto& l : ledger) {
            const auto* p = find(run.breakdowns, l.service);
            if (!p) return "pipeline lacks " + l.service;
            const std::array<double, 3> got{p->compute_joules, p->network_joules, p->storage_joules};
            const std::array<double, 3> want{l.compute_joules, l.network_joules, l.storage_joules};
            for (int c = 0; c < 3; ++c) {
                if (aligned ? got[c] != want[c] : std::fabs(got[c] - want[c]) > bound[l.service][c] + 1e-9) {
                    return std::string(aligned ? "aligned" : "unaligned") + " " + l.service + " component " +
                           std::to_string(c) + ": pipeline " + fmt(got[c]) + " ledger " + fmt(want[c]);
                }
            }
        }
    }
    const double elapsed = seconds_since(t0);
    if (elapsed >= 10.0) return "took " + fmt(elapsed) + " s";
    return "";
}

// --- 4 and 5 -------------------------------------------------------------------------

std::map<std::string, ProcessedRun> tracing_runs(const std::string& out) {
    std::map<std::string, ProcessedRun> runs;
    const auto config = ModelConfig::load(std::string(GOXN_SOURCE_DIR) + "/config/factors.yaml");
    for (const char* key : {"tracing-low", "tracing-medium", "tracing-high"}) {
        sim::SimEnvironment env(sim::TopologySpec::default_demo(), sim::SimSettings{});
        CatalogOptions o;
        o.output_dir = out;
        o.seed = 11;
        const auto spec = catalog_spec(key, o);
        const auto report = run_experiment(spec, env);
        if (report.status != RunStatus::complete) throw std::runtime_error(report.error);
        runs[key] = process_run(spec.run_dir(), config, ServiceMap::defaults());
    }
    return runs;
}

std::string dominance_shift(const std::map<std::string, ProcessedRun>& runs) {
    double previous = -1.0;
    std::string detail;
    for (const char* key : {"tracing-low", "tracing-medium", "tracing-high"}) {
        const auto* sink = find(runs.at(key).breakdowns, "otel-collector");
        if (!sink) return std::string("no sink row in ") + key;
        const double aux = sink->share_network + sink->share_storage;
        detail += std::string(key) + "=" + fmt(aux) + " ";
        if (!(aux > previous)) return "not strictly increasing: " + detail;
        previous = aux;
    }
    const auto* high = find(runs.at("tracing-high").breakdowns, "otel-collector");
    const auto dom = dominant_component(*high);
    if (dom == Component::compute) return "dominant at 50% is compute: " + detail;
    return "";
}

std::string underestimation(const std::map<std::string, ProcessedRun>& runs) {
    double best = 0.0;
    for (const char* svc : {"otel-collector", "jaeger"}) {
        const auto* b = find(runs.at("tracing-high").breakdowns, svc);
        if (b) best = std::max(best, compute_only_underestimation(*b));
    }
    if (best < 50.0) return "largest auxiliary underestimation " + fmt(best) + " %";
    return "";
}

// --- 6 and 7 -------------------------------------------------------------------------

std::string full_suite(const std::string& out) {
    const auto t0 = Clock::now();
    std::string err;
    const int code = run_cli({"suite", "catalog", "--env", "sim", "--seed", "7", "--output", out}, err);
    if (code != 0) return "exit " + std::to_string(code) + ": " + err;
    for (const auto& e : scenario_catalog()) {
        const fs::path dir = fs::path(out) / e.key;
        for (const std::string f : {std::string(kComputeCsv), std::string(kNetworkCsv), std::string(kStorageCsv),
                                    energy_totals_file(e.key), std::string(kReportFile)}) {
            if (!fs::exists(dir / f)) return "missing " + (dir / f).string();
        }
    }
    for (const char* f : {kSuiteManifest, kComparisonCsv}) {
        if (!fs::exists(fs::path(out) / f)) return std::string("missing ") + f;
    }
    const auto manifest = read_suite_manifest(out);
    if (manifest.size() != 7) return "suite.yaml lists " + std::to_string(manifest.size()) + " scenarios";
    const double elapsed = seconds_since(t0);
    if (elapsed >= 300.0) return "took " + fmt(elapsed) + " s";
    return "";
}

std::string determinism(const std::string& first) {
    TempDir second;
    std::string err;
    if (run_cli({"suite", "catalog", "--env", "sim", "--seed", "7", "--output", second.str()}, err) != 0) return err;
    const auto a = tree(first);
    const auto b = tree(second.path());
    if (a.empty()) return "first tree is empty";
    if (a != b) {
        for (const auto& [k, v] : a) {
            auto it = b.find(k);
            if (it == b.end()) return "only in first run: " + k;
            if (it->second != v) return "differs: " + k;
        }
        return "second run has extra files";
    }
    return "";
}

// --- 8 -------------------------------------------------------------------------------

std::string round_trips() {
    std::mt19937_64 rng(8);
    auto pick = [&](std::uint64_t n) { return static_cast<int>(rng() % n); };
    auto text = [&](int max_len) {
        static const std::string alphabet = "azAZ09 _-.:/,'\"\\#{}[]&*!|>%@";
        std::string s;
        for (int i = pick(static_cast<std::uint64_t>(max_len) + 1); i > 0; --i) s += alphabet[pick(alphabet.size())];
        return s;
    };
    auto real = [&] { return std::ldexp(static_cast<double>(rng() >> 11), -pick(70)); };
    for (int trial = 0; trial < 200; ++trial) {
        TempDir tmp;
        RawStore store;
        store.window.start = static_cast<TimestampMs>(rng() % 2'000'000'000'000);
        store.window.end = store.window.start + 1 + pick(600000);
        for (int q = pick(5); q > 0; --q) {
            QueryRecord rec;
            rec.query = {"q" + std::to_string(q), text(30) + "x", 1.0 + pick(60), pick(2) ? MetricKind::gauge : MetricKind::counter};
            if (pick(5) == 0) {
                rec.status = QueryStatus::failed;
                rec.error = text(40);
            }
            for (int s = pick(4); s > 0; --s) {
                MetricSeries ser;
                ser.metric_name = "m" + std::to_string(q);
                ser.kind = rec.query.kind;
                ser.labels = {{"pod", "p" + std::to_string(s)}, {"container", text(6) + "c"}};
                TimestampMs t = store.window.start;
                for (int k = 1 + pick(8); k > 0; --k) {
                    t += 1 + pick(10000);
                    ser.samples.push_back({t, real()});
                }
                rec.series.push_back(std::move(ser));
            }
            std::sort(rec.series.begin(), rec.series.end(),
                      [](const MetricSeries& a, const MetricSeries& b) { return a.labels < b.labels; });
            store.queries.push_back(std::move(rec));
        }
        write_snapshot_store(store, tmp.str("raw"));
        if (!(read_snapshot_store(tmp.str("raw")) == store)) return "raw store trial " + std::to_string(trial);

        ExperimentReport r;
        r.name = "r" + std::to_string(trial);
        r.scenario_key = text(10);
        r.sue = text(16);
        r.error = text(30);
        r.status = pick(2) ? RunStatus::complete : RunStatus::failed;
        if (r.status == RunStatus::complete || pick(2)) r.window = store.window;
        for (int k = pick(4); k > 0; --k) {
            TreatmentOutcome o;
            o.key = text(8) + "k";
            o.params["p"] = text(6);
            o.target = text(6);
            if (pick(2)) {
                o.applied_at = store.window.start - pick(1000);
                o.verified_at = *o.applied_at + pick(10);
                if (pick(2)) o.reverted_at = store.window.end + pick(1000);
            }
            o.verified = pick(2);
            o.detail = text(20);
            if (pick(2)) o.restore["percent"] = text(4);
            r.treatments.push_back(std::move(o));
        }
        r.load_stats = {rng() % 100000, rng() % 100000, rng() % 100, real(), real(), real(), real()};
        if (r.status == RunStatus::complete) r.raw_store_path = kRawStoreDir;
        persist_report(r, tmp.str());
        if (!(read_report(tmp.str()) == r)) return "report trial " + std::to_string(trial);
    }
    return "";
}

// --- 9 -------------------------------------------------------------------------------

std::string mean_ci_check() {
    // Hand value: t(0.975, df = 2) = 4.303, s = 1, n = 3 -> 4.303 / sqrt(3).
    const double hand = 4.303 / std::sqrt(3.0);
    const auto [mean, half] = mean_ci({1, 2, 3}, 0.95);
    if (mean != 2.0) return "mean " + fmt(mean);
    if (std::fabs(half - 2.484) > 1e-3 || std::fabs(half - hand) > 1e-3) return "half-width " + fmt(half);
    return "";
}

// --- 10 ------------------------------------------------------------------------------

std::string wire_compat() {
    sim::SimSettings settings;
    settings.scrape_interval_s = 5.0;
    settings.trace_sampling_fraction = 0.5;
    sim::Simulator simulator(sim::TopologySpec::default_demo(), settings);
    for (int i = 0; i < 600; ++i) {
        simulator.handle_request(kRecommendationRoute);
        simulator.advance_clock(100);
    }
    auto server = sim::serve_http(simulator, "127.0.0.1:0");
    PrometheusClient client(server->base_url());
    std::string problem;
    for (const auto& q : default_responses()) {
        for (const TimeWindow w : {TimeWindow{0, 60000}, TimeWindow{7500, 42500}}) {
            auto local = simulator.query_range(q.promql, w);
            std::erase_if(local, [](const MetricSeries& s) { return s.samples.empty(); });
            const auto remote = client.query_range(q, w);
            if (remote.empty()) problem = q.name + ": empty result";
            if (!(remote == local)) problem = q.name + ": HTTP result differs from in-memory result";
            if (!problem.empty()) break;
        }
        if (!problem.empty()) break;
    }
    server->stop();
    return problem;
}

}  // namespace

int main() {
    TempDir suite_dir;
    TempDir tracing_dir;
    std::optional<std::map<std::string, ProcessedRun>> tracing;
    auto with_tracing = [&](auto fn) {
        return [&, fn] {
            if (!tracing) tracing = tracing_runs(tracing_dir.str());
            return fn(*tracing);
        };
    };

    const std::vector<Criterion> criteria = {
        {1, "counter increase matches brute force on every sequence up to length 6", counter_oracle},
        {2, "conservation and additivity over 1000 random container sets", conservation},
        {3, "pipeline totals match the simulator ledger", pipeline_vs_ledger},
        {4, "tracing shifts the collector's energy toward network and storage", with_tracing(dominance_shift)},
        {5, "compute-only accounting misses at least 50% for an auxiliary service", with_tracing(underestimation)},
        {6, "suite catalog produces every run's files plus suite.yaml and comparison.csv",
         [&] { return full_suite(suite_dir.str()); }},
        {7, "two suite runs with one seed give byte-identical trees", [&] { return determinism(suite_dir.str()); }},
        {8, "report and raw-store files round-trip losslessly", round_trips},
        {9, "mean_ci half-width for [1,2,3] at 95%", mean_ci_check},
        {10, "HTTP query_range equals the in-memory query", wire_compat},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::string problem;
        try {
            problem = c.check();
        } catch (const std::exception& e) {
            problem = std::string("exception: ") + e.what();
        }
        if (problem.empty()) {
            std::cout << "PASS criterion " << c.id << ": " << c.title << "\n";
        } else {
            ++failures;
            std::cout << "FAIL criterion " << c.id << ": " << c.title << " (" << problem << ")\n";
        }
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}
