#pragma once

// Data processing of a run directory into the model CSV families, plus
// cross-scenario comparison and summary statistics.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goxn/energy_model.hpp"
#include "goxn/metrics.hpp"

namespace goxn {

inline constexpr const char* kStorageCsv = "cadvisor_storage_usage_writes_all_absolute_bytes.csv";
inline constexpr const char* kNetworkCsv = "cadvisor_network_bytes_received_all_absolute_bytes.csv";
inline constexpr const char* kComputeCsv = "pods_kepler_joules_all_absolute_joules.csv";
inline constexpr const char* kComparisonCsv = "comparison.csv";
inline constexpr const char* kPlotDataCsv = "plot_data.csv";

std::string energy_totals_file(const std::string& scenario);

struct ProcessedRun {
    std::string scenario_key;
    std::vector<ContainerUsage> usages;
    std::vector<ServiceEnergyBreakdown> breakdowns;
    std::vector<UsageWarning> warnings;

    /// ";"-joined warning tags for a service's containers, sorted and unique.
    std::string service_warnings(const std::string& service) const;
};

/// Factors and model-input configuration, read from a YAML file shared across scenarios.
struct ModelConfig {
    EnergyIntensityFactors factors = EnergyIntensityFactors::defaults();
    ModelInputs inputs;

    static ModelConfig load(const std::string& path);
};

/// Reads report + raw store from run_dir and writes the three input CSVs and
/// energy_totals_<scenario>.csv next to them. Byte-stable across reruns.
/// Throws IoError when report.yaml is missing, ValidationError for an empty store.
ProcessedRun process_run(const std::string& run_dir, const ModelConfig& config,
                         const ServiceMap& map);

/// Same model over an already loaded store; writes nothing.
ProcessedRun process_store(const std::string& scenario_key, const RawStore& store,
                           const ModelConfig& config, const ServiceMap& map);

/// Reads energy_totals_<scenario>.csv back from a processed run directory.
ProcessedRun load_processed(const std::string& run_dir);

struct ComparisonRow {
    std::string scenario;
    std::string service;
    double total_joules = 0.0;
    double share_compute = 0.0;
    double share_network = 0.0;
    double share_storage = 0.0;
    std::optional<double> delta_vs_baseline_pct;  // none when the baseline total is 0 or absent
    std::optional<Component> dominant;            // none when total is 0
    double compute_only_underestimation_pct = 0.0;
    ServiceEnergyBreakdown breakdown;
};

struct ComparisonTable {
    std::string baseline;
    std::vector<ComparisonRow> rows;  // sorted by (scenario, service)

    const ComparisonRow* find(const std::string& scenario, const std::string& service) const;
};

/// Throws ValidationError when no run carries the baseline key.
ComparisonTable compare(const std::vector<ProcessedRun>& runs, const std::string& baseline_key);

void write_comparison_csv(const ComparisonTable& table, const std::string& path);

/// Long format: scenario,service,component,joules,share. Throws ValidationError on an empty table.
void emit_plot_data(const ComparisonTable& table, const std::string& path);
std::vector<std::vector<std::string>> plot_data_rows(const ComparisonTable& table);

/// Sample mean and Student-t half-width. Throws DomainError for n < 2.
std::pair<double, double> mean_ci(const std::vector<double>& values, double confidence = 0.95);

}  // namespace goxn
