#include "goxn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <yaml-cpp/yaml.h>

#include "goxn/csv.hpp"
#include "goxn/error.hpp"
#include "goxn/runner.hpp"

namespace goxn {

namespace fs = std::filesystem;

namespace {

const CsvRow kTotalsHeader = {"service",        "compute_joules", "network_joules",
                              "storage_joules", "total_joules",   "share_compute",
                              "share_network",  "share_storage",  "compute_only_underestimation_pct",
                              "warnings"};

void write_input_csv(const fs::path& path, const std::vector<ContainerUsage>& usages, const char* unit,
                     const std::function<std::string(const ContainerUsage&)>& value) {
    std::vector<CsvRow> rows{{"container_id", "pod", "service", unit}};
    for (const auto& u : usages) rows.push_back({u.container_id, u.pod, u.service, value(u)});
    write_csv_file(path.string(), rows);
}

std::vector<CsvRow> read_with_header(const fs::path& path, const CsvRow& header) {
    if (!fs::exists(path)) throw IoError("missing " + path.string());
    auto rows = read_csv_file(path.string());
    if (rows.empty() || rows.front() != header) {
        throw ParseError(path.string() + ":1: unexpected header");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != header.size()) {
            throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": expected " +
                             std::to_string(header.size()) + " fields");
        }
    }
    rows.erase(rows.begin());
    return rows;
}

}  // namespace

std::string energy_totals_file(const std::string& scenario) { return "energy_totals_" + scenario + ".csv"; }

std::string ProcessedRun::service_warnings(const std::string& service) const {
    std::map<std::string, std::string> service_of;
    for (const auto& u : usages) service_of[u.container_id] = u.service;
    std::set<std::string> tags;
    for (const auto& w : warnings) {
        auto it = service_of.find(w.container_id);
        const std::string& owner = it == service_of.end() ? w.container_id : it->second;
        if (owner == service) tags.insert("missing_" + w.missing_group);
    }
    std::string out;
    for (const auto& t : tags) out += (out.empty() ? "" : ";") + t;
    return out;
}

ModelConfig ModelConfig::load(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw IoError("cannot read factors file " + path);
    } catch (const YAML::Exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    auto fail = [&](const YAML::Node& n, const std::string& msg) {
        throw SchemaError(path + ":" + std::to_string(n.Mark().line + 1) + ": " + msg);
    };
    if (!root.IsMap()) fail(root, "expected a mapping");
    for (const auto& kv : root) {
        const auto k = kv.first.as<std::string>();
        if (k != "network_kwh_per_gb" && k != "storage_kwh_per_gb" && k != "inputs") {
            fail(kv.first, "unknown key '" + k + "'");
        }
    }
    auto number = [&](const char* key, double fallback) {
        const auto n = root[key];
        if (!n) return fallback;
        try {
            return parse_number(n.as<std::string>());
        } catch (const ParseError&) {
            fail(n, std::string(key) + " must be a number");
        }
        return fallback;
    };
    ModelConfig config;
    const auto defaults = EnergyIntensityFactors::defaults();
    try {
        config.factors = EnergyIntensityFactors::from_kwh_per_gb(
            number("network_kwh_per_gb", defaults.network_kwh_per_gb),
            number("storage_kwh_per_gb", defaults.storage_kwh_per_gb));
    } catch (const DomainError& e) {
        throw SchemaError(path + ": " + e.what());
    }
    if (const auto in = root["inputs"]) {
        if (!in.IsMap()) fail(in, "inputs must be a mapping");
        for (const auto& kv : in) {
            const auto k = kv.first.as<std::string>();
            if (k == "compute") {
                config.inputs.compute = kv.second.as<std::string>();
            } else if (k == "storage") {
                config.inputs.storage = kv.second.as<std::string>();
            } else if (k == "network") {
                config.inputs.network.clear();
                if (kv.second.IsSequence()) {
                    for (const auto& n : kv.second) config.inputs.network.push_back(n.as<std::string>());
                } else {
                    config.inputs.network.push_back(kv.second.as<std::string>());
                }
                if (config.inputs.network.empty()) fail(kv.second, "inputs.network is empty");
            } else {
                fail(kv.first, "unknown key '" + k + "' in inputs");
            }
        }
    }
    return config;
}

ProcessedRun process_store(const std::string& scenario_key, const RawStore& store,
                           const ModelConfig& config, const ServiceMap& map) {
    auto extraction = usages_from_store(store, store.window, map, config.inputs);
    ProcessedRun run;
    run.scenario_key = scenario_key;
    run.breakdowns = aggregate_services(extraction.usages, config.factors);
    run.usages = std::move(extraction.usages);
    run.warnings = std::move(extraction.warnings);
    return run;
}

ProcessedRun process_run(const std::string& run_dir, const ModelConfig& config, const ServiceMap& map) {
    const fs::path dir(run_dir);
    if (!fs::exists(dir / kReportFile)) throw IoError("missing " + (dir / kReportFile).string());
    const auto report = read_report(run_dir);
    if (report.status != RunStatus::complete) {
        throw ValidationError("run " + run_dir + " did not complete: " + report.error);
    }
    RawStore store = read_snapshot_store((dir / report.raw_store_path).string());
    auto run = process_store(report.scenario_key, store, config, map);

    write_input_csv(dir / kComputeCsv, run.usages, "joules",
                    [](const ContainerUsage& u) { return format_number(u.compute_joules); });
    write_input_csv(dir / kNetworkCsv, run.usages, "bytes",
                    [](const ContainerUsage& u) { return format_number(u.network_bytes); });
    write_input_csv(dir / kStorageCsv, run.usages, "bytes",
                    [](const ContainerUsage& u) { return format_number(u.storage_bytes); });

    std::vector<CsvRow> rows{kTotalsHeader};
    for (const auto& b : run.breakdowns) {
        rows.push_back({b.service, format_number(b.compute_joules), format_number(b.network_joules),
                        format_number(b.storage_joules), format_number(b.total_joules),
                        format_number(b.share_compute), format_number(b.share_network),
                        format_number(b.share_storage), format_number(compute_only_underestimation(b)),
                        run.service_warnings(b.service)});
    }
    write_csv_file((dir / energy_totals_file(run.scenario_key)).string(), rows);
    return run;
}

ProcessedRun load_processed(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const auto report = read_report(run_dir);
    if (!report.window) throw ValidationError("run " + run_dir + " has no measurement window");
    ProcessedRun run;
    run.scenario_key = report.scenario_key;

    const auto compute = read_with_header(dir / kComputeCsv, {"container_id", "pod", "service", "joules"});
    const auto network = read_with_header(dir / kNetworkCsv, {"container_id", "pod", "service", "bytes"});
    const auto storage = read_with_header(dir / kStorageCsv, {"container_id", "pod", "service", "bytes"});
    if (compute.size() != network.size() || compute.size() != storage.size()) {
        throw ParseError(run_dir + ": input CSVs list different containers");
    }
    for (std::size_t i = 0; i < compute.size(); ++i) {
        if (network[i][0] != compute[i][0] || storage[i][0] != compute[i][0]) {
            throw ParseError(run_dir + ": input CSVs list different containers");
        }
        ContainerUsage u;
        u.container_id = compute[i][0];
        u.pod = compute[i][1];
        u.service = compute[i][2];
        u.compute_joules = parse_number(compute[i][3]);
        u.network_bytes = parse_unsigned(network[i][3]);
        u.storage_bytes = parse_unsigned(storage[i][3]);
        u.window = *report.window;
        run.usages.push_back(std::move(u));
    }

    const auto totals = read_with_header(dir / energy_totals_file(run.scenario_key), kTotalsHeader);
    for (const auto& r : totals) {
        run.breakdowns.push_back(ServiceEnergyBreakdown::from_components(
            r[0], parse_number(r[1]), parse_number(r[2]), parse_number(r[3])));
        // Warning tags survive per service only.
        std::size_t pos = 0;
        while (pos < r[9].size()) {
            auto end = r[9].find(';', pos);
            if (end == std::string::npos) end = r[9].size();
            auto tag = r[9].substr(pos, end - pos);
            if (tag.rfind("missing_", 0) == 0) run.warnings.push_back({r[0], tag.substr(8)});
            pos = end + 1;
        }
    }
    return run;
}

const ComparisonRow* ComparisonTable::find(const std::string& scenario, const std::string& service) const {
    for (const auto& r : rows) {
        if (r.scenario == scenario && r.service == service) return &r;
    }
    return nullptr;
}

ComparisonTable compare(const std::vector<ProcessedRun>& runs, const std::string& baseline_key) {
    std::set<std::string> keys;
    const ProcessedRun* baseline = nullptr;
    for (const auto& run : runs) {
        if (!keys.insert(run.scenario_key).second) {
            throw ValidationError("scenario '" + run.scenario_key + "' given more than once");
        }
        if (run.scenario_key == baseline_key) baseline = &run;
    }
    if (!baseline) throw ValidationError("baseline scenario '" + baseline_key + "' is not among the inputs");

    std::map<std::string, double> base_totals;
    for (const auto& b : baseline->breakdowns) base_totals[b.service] = b.total_joules;

    ComparisonTable table;
    table.baseline = baseline_key;
    for (const auto& run : runs) {
        for (const auto& b : run.breakdowns) {
            ComparisonRow row;
            row.scenario = run.scenario_key;
            row.service = b.service;
            row.total_joules = b.total_joules;
            row.share_compute = b.share_compute;
            row.share_network = b.share_network;
            row.share_storage = b.share_storage;
            row.compute_only_underestimation_pct = compute_only_underestimation(b);
            row.breakdown = b;
            if (b.total_joules > 0.0) row.dominant = dominant_component(b);
            if (run.scenario_key == baseline_key) {
                row.delta_vs_baseline_pct = 0.0;
            } else if (auto it = base_totals.find(b.service); it != base_totals.end() && it->second > 0.0) {
                row.delta_vs_baseline_pct = 100.0 * (b.total_joules - it->second) / it->second;
            }
            table.rows.push_back(std::move(row));
        }
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        return std::tie(a.scenario, a.service) < std::tie(b.scenario, b.service);
    });
    return table;
}

void write_comparison_csv(const ComparisonTable& table, const std::string& path) {
    std::vector<CsvRow> rows{{"scenario", "service", "compute_joules", "network_joules", "storage_joules",
                              "total_joules", "share_compute", "share_network", "share_storage",
                              "delta_vs_baseline_pct", "dominant", "compute_only_underestimation_pct"}};
    for (const auto& r : table.rows) {
        rows.push_back({r.scenario, r.service, format_number(r.breakdown.compute_joules),
                        format_number(r.breakdown.network_joules), format_number(r.breakdown.storage_joules),
                        format_number(r.total_joules), format_number(r.share_compute),
                        format_number(r.share_network), format_number(r.share_storage),
                        r.delta_vs_baseline_pct ? format_number(*r.delta_vs_baseline_pct) : "",
                        r.dominant ? to_string(*r.dominant) : "",
                        format_number(r.compute_only_underestimation_pct)});
    }
    write_csv_file(path, rows);
}

std::vector<std::vector<std::string>> plot_data_rows(const ComparisonTable& table) {
    std::vector<CsvRow> rows;
    for (const auto& r : table.rows) {
        for (Component c : {Component::compute, Component::network, Component::storage}) {
            rows.push_back({r.scenario, r.service, to_string(c), format_number(r.breakdown.joules(c)),
                            format_number(r.breakdown.share(c))});
        }
    }
    return rows;
}

void emit_plot_data(const ComparisonTable& table, const std::string& path) {
    if (table.rows.empty()) throw ValidationError("comparison table is empty");
    std::vector<CsvRow> rows{{"scenario", "service", "component", "joules", "share"}};
    for (auto& r : plot_data_rows(table)) rows.push_back(std::move(r));
    write_csv_file(path, rows);
}

std::pair<double, double> mean_ci(const std::vector<double>& values, double confidence) {
    if (values.size() < 2) throw DomainError("mean_ci needs at least two values");
    if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must be in (0, 1)");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    const double t = boost::math::quantile(dist, 1.0 - (1.0 - confidence) / 2.0);
    return {mean, t * sd / std::sqrt(n)};
}

}  // namespace goxn
