#pragma once

// Container-level metric collection and reduction of counter series to window totals.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "goxn/energy_model.hpp"
#include "goxn/time.hpp"

namespace goxn {

enum class MetricKind { counter, gauge };

std::string to_string(MetricKind kind);
MetricKind metric_kind_from_string(const std::string& text);

struct MetricSample {
    TimestampMs timestamp = 0;
    double value = 0.0;

    friend bool operator==(const MetricSample&, const MetricSample&) = default;
};

using LabelSet = std::map<std::string, std::string>;

struct MetricSeries {
    std::string metric_name;
    MetricKind kind = MetricKind::counter;
    LabelSet labels;
    std::vector<MetricSample> samples;  // strictly increasing timestamps

    friend bool operator==(const MetricSeries&, const MetricSeries&) = default;
};

struct ResponseQuery {
    std::string name;  // output file stem, unique within a spec
    std::string promql;
    double step_seconds = 15.0;
    MetricKind kind = MetricKind::counter;

    TimestampMs step_ms() const { return seconds_to_ms(step_seconds); }

    friend bool operator==(const ResponseQuery&, const ResponseQuery&) = default;
};

/// The three queries the energy model consumes, with Kepler/cAdvisor selectors.
std::vector<ResponseQuery> default_responses(double step_seconds = 5.0);

/// Names of the store groups the model reads. Network may list several queries
/// (received only by default; add the transmitted query for both directions).
struct ModelInputs {
    std::string compute = "pods_kepler_joules";
    std::vector<std::string> network = {"cadvisor_network_bytes_received"};
    std::string storage = "cadvisor_storage_usage_writes";

    static constexpr const char* kTransmittedQuery = "cadvisor_network_bytes_transmitted";
};

/// Something that answers range queries: a live Prometheus endpoint or the simulator.
class MetricSource {
public:
    virtual ~MetricSource() = default;
    virtual std::vector<MetricSeries> query_range(const ResponseQuery& query,
                                                  const TimeWindow& window) = 0;
    /// Cheap reachability probe run before an experiment opens its window.
    virtual bool preflight() = 0;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
};

/// HTTP client for GET /api/v1/query_range with the standard matrix envelope.
class PrometheusClient : public MetricSource {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit PrometheusClient(std::string endpoint, RetryPolicy retry = {}, Sleeper sleeper = {});

    std::vector<MetricSeries> query_range(const ResponseQuery& query,
                                          const TimeWindow& window) override;
    bool preflight() override;

    const std::string& endpoint() const { return endpoint_; }

private:
    std::string endpoint_;
    RetryPolicy retry_;
    Sleeper sleeper_;
};

/// One-shot wrapper around PrometheusClient.
std::vector<MetricSeries> query_range(const std::string& endpoint, const ResponseQuery& query,
                                      const TimeWindow& window, RetryPolicy retry = {});

/// Decodes a query_range response body. Throws ParseError on anything but a
/// successful matrix result.
std::vector<MetricSeries> parse_query_range_response(const std::string& body,
                                                     const ResponseQuery& query);

/// Encodes series in the matrix envelope (used by the simulator's HTTP server).
std::string encode_query_range_response(const std::vector<MetricSeries>& series);

/// Reset-aware counter increase over the samples inside `window`: positive deltas
/// are summed, a drop counts the post-reset value. No boundary extrapolation.
/// Throws ValidationError for gauge series.
double increase_over_window(const MetricSeries& series, const TimeWindow& window);

/// Same rule over a bare value sequence.
double counter_increase(const std::vector<double>& values);

enum class QueryStatus { ok, failed };

struct QueryRecord {
    ResponseQuery query;
    QueryStatus status = QueryStatus::ok;
    std::string error;
    std::vector<MetricSeries> series;

    friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

/// Everything collected for one experiment window, keyed by query name.
struct RawStore {
    TimeWindow window;
    std::vector<QueryRecord> queries;

    const QueryRecord* find(const std::string& name) const;

    friend bool operator==(const RawStore&, const RawStore&) = default;
};

/// Evaluates every query over a closed window. Per-query failures are recorded
/// in the store, never dropped. Queries run concurrently.
RawStore collect_responses(MetricSource& source, const std::vector<ResponseQuery>& queries,
                           const TimeWindow& window);

/// <dir>/manifest.yaml plus one <query>.csv per query.
void write_snapshot_store(const RawStore& store, const std::string& dir);
RawStore read_snapshot_store(const std::string& dir);

/// Best-effort reader for a replication-package experiment directory holding
/// per-metric wide CSVs (first column timestamp, one column per container).
RawStore read_package_csv_dir(const std::string& dir);

/// Identity of the container a series belongs to.
struct ContainerIdentity {
    std::string container_id;  // "<pod>/<container>"
    std::string pod;
    std::string container;
};

/// Reads pod/container (or pod_name/container_name) labels. Returns nullopt
/// when no pod label is present.
std::optional<ContainerIdentity> container_identity(const LabelSet& labels);

struct UsageWarning {
    std::string container_id;
    std::string missing_group;

    friend bool operator==(const UsageWarning&, const UsageWarning&) = default;
};

struct UsageExtraction {
    std::vector<ContainerUsage> usages;  // sorted by container_id
    std::vector<UsageWarning> warnings;
};

/// Reduces the model's input groups to per-container usages. Containers missing a
/// group get 0 for it plus a warning. Throws ValidationError if all groups are missing.
UsageExtraction usages_from_store(const RawStore& store, const TimeWindow& window,
                                  const ServiceMap& map, const ModelInputs& inputs = {});

struct StorageSnapshot {
    TimestampMs taken_at = 0;
    std::vector<std::pair<std::string, std::uint64_t>> rows;  // (container_id, bytes_used)

    friend bool operator==(const StorageSnapshot&, const StorageSnapshot&) = default;
};

/// Per container max(0, after - before); appearing containers contribute their
/// value, removed ones 0. Throws DomainError unless before.taken_at < after.taken_at.
std::map<std::string, std::uint64_t> snapshot_delta(const StorageSnapshot& before,
                                                    const StorageSnapshot& after);

/// Writes snapshot_<epoch seconds>.csv into `dir` and returns the path.
std::string write_storage_snapshot(const StorageSnapshot& snapshot, const std::string& dir);
StorageSnapshot read_storage_snapshot(const std::string& path);

}  // namespace goxn
