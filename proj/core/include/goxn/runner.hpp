#pragma once

// Experiment orchestration: spec files, the run phases, suites and reports.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "goxn/environment.hpp"
#include "goxn/loadgen.hpp"
#include "goxn/metrics.hpp"
#include "goxn/treatments.hpp"

namespace goxn {

inline constexpr const char* kEngineVersion = "0.1.0";
inline constexpr const char* kReportFile = "report.yaml";
inline constexpr const char* kRawStoreDir = "raw";
inline constexpr const char* kSnapshotDir = "storage_snapshots";
inline constexpr const char* kSuiteManifest = "suite.yaml";

struct ExperimentSpec {
    std::string name;
    std::string scenario;  // defaults to name
    std::string sue;       // URL or "sim:<topology>"
    std::vector<TreatmentSpec> treatments;
    std::vector<ResponseQuery> responses;
    LoadProfile load;
    double duration = 60.0;
    std::string output_dir = "goxn-output";
    double settle_seconds = 0.0;

    bool simulated() const { return sue.rfind("sim:", 0) == 0; }
    std::string run_dir() const;

    /// Throws ValidationError.
    void validate(const TreatmentRegistry& registry = builtin_treatments()) const;

    friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

/// Strict YAML schema. Unknown keys and bad values throw SchemaError naming the
/// key and line.
ExperimentSpec parse_spec(const std::string& yaml_text, const std::string& source = "<string>");
ExperimentSpec load_spec(const std::string& path);
std::string dump_spec(const ExperimentSpec& spec);

enum class RunStatus { complete, failed };

std::string to_string(RunStatus status);

struct ExperimentReport {
    std::string name;
    std::string scenario_key;
    std::string sue;
    RunStatus status = RunStatus::complete;
    std::string error;
    std::optional<TimeWindow> window;
    std::vector<TreatmentOutcome> treatments;
    LoadStats load_stats;
    std::string raw_store_path;  // relative to the run directory
    std::vector<std::string> storage_snapshot_paths;
    std::string engine_version = kEngineVersion;

    friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Writes <dir>/report.yaml. Throws SchemaError if a complete report has no window.
void persist_report(const ExperimentReport& report, const std::string& dir);
/// Strict read; complete reports must reference artifacts that exist.
ExperimentReport read_report(const std::string& dir);

struct CatalogEntry {
    std::string key;
    std::string config_file;  // file name of the original scenario config
    std::vector<TreatmentSpec> treatments;
};

/// The seven scenarios: baseline, monitoring-medium/high, tracing-low/medium/high,
/// service-mesh.
const std::vector<CatalogEntry>& scenario_catalog();
const CatalogEntry& catalog_entry(const std::string& key);

struct CatalogOptions {
    std::string sue = "sim:default";
    double duration = 60.0;
    double step_seconds = 5.0;
    std::string output_dir = "goxn-output";
    std::uint64_t seed = 1;
};

ExperimentSpec catalog_spec(const std::string& key, const CatalogOptions& options = {});

/// Runs every phase in order. Never throws for phase failures: a failed run
/// returns a report with status failed whose files live under <output_dir>/failed/<name>.
ExperimentReport run_experiment(const ExperimentSpec& spec, Environment& env,
                                const TreatmentRegistry& registry = builtin_treatments());

struct SuiteEntry {
    std::string scenario;
    RunStatus status = RunStatus::complete;
    std::string output;

    friend bool operator==(const SuiteEntry&, const SuiteEntry&) = default;
};

struct SuiteResult {
    std::vector<ExperimentReport> reports;
    std::vector<SuiteEntry> entries;

    bool all_complete() const;
};

/// Sequential; a failing scenario is recorded and the next one still runs.
/// Writes <manifest_dir>/suite.yaml. Throws ValidationError for an empty list.
SuiteResult run_suite(const std::vector<ExperimentSpec>& specs, Environment& env,
                      const std::string& manifest_dir,
                      const TreatmentRegistry& registry = builtin_treatments());

std::vector<SuiteEntry> read_suite_manifest(const std::string& dir);

}  // namespace goxn
