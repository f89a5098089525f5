#pragma once

// Synthetic microservice environment. Requests walk a call graph and accrue
// per-container joules and bytes; a scraper samples the counters on a fixed
// cadence; an exact ledger keeps the ground truth for oracle checks.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "goxn/energy_model.hpp"
#include "goxn/environment.hpp"
#include "goxn/metrics.hpp"
#include "goxn/time.hpp"

namespace goxn::sim {

inline constexpr const char* kJoulesMetric = "kepler_container_joules_total";
inline constexpr const char* kRxBytesMetric = "container_network_receive_bytes_total";
inline constexpr const char* kFsWritesMetric = "container_fs_writes_bytes_total";
inline constexpr const char* kNamespace = "sim";

struct RequestCost {
    double compute_joules = 0.0;
    std::uint64_t rx_bytes = 0;
    std::uint64_t fs_write_bytes = 0;
};

struct SpanCost {
    std::uint64_t rx_bytes_at_sink = 0;
    std::uint64_t fs_write_bytes_at_backend = 0;
};

struct IdleCost {
    double joules_per_s = 0.0;
    std::uint64_t rx_bytes_per_s = 0;
};

struct ServiceNode {
    std::string name;
    int containers_per_service = 1;
    RequestCost per_request;
    SpanCost per_span;
    IdleCost idle;
    double per_scrape_joules = 0.0;  // exporter cost per scrape, per container
};

struct Edge {
    std::string caller;
    std::string callee;
    int calls = 1;  // per request of the caller
};

struct Route {
    std::string path;
    std::string entry;
};

struct TopologySpec {
    std::string entry;
    std::vector<ServiceNode> services;
    std::vector<Edge> edges;
    std::vector<Route> routes;  // defaults to kRecommendationRoute -> entry
    std::string telemetry_sink;
    std::string storage_backend;

    /// Throws ValidationError: missing entry, unknown names, negative costs, cycles.
    void validate() const;

    const ServiceNode* find(const std::string& name) const;

    static TopologySpec from_yaml(const std::string& text);
    static TopologySpec load(const std::string& path);
    /// Five app services in a chain plus collector and trace backend.
    static TopologySpec default_demo();
    /// "sim:default" or "sim:<path>".
    static TopologySpec from_descriptor(const std::string& descriptor);
};

struct MeshCost {
    double compute_joules = 0.0;
    std::uint64_t rx_bytes = 0;
};

struct SimSettings {
    double trace_sampling_fraction = 0.01;
    double scrape_interval_s = 60.0;
    bool mesh_enabled = false;
    MeshCost mesh_per_request{0.02, 600};
    std::uint64_t seed = 1;
    /// Test hook: the n-th scrape (1-based) sees every counter reset to zero.
    std::optional<int> reset_at_scrape;

    void validate() const;
};

/// Exact per-service totals since t = 0.
struct LedgerRow {
    std::string service;
    double compute_joules = 0.0;
    std::uint64_t rx_bytes = 0;
    std::uint64_t fs_write_bytes = 0;

    friend bool operator==(const LedgerRow&, const LedgerRow&) = default;
};

/// The simulated SUE. All public methods are serialized on one mutex, so HTTP
/// handlers may call in concurrently. Simulated time starts at 0 ms.
///
/// "State at t" means the state when the clock reaches t, before any requests
/// handled at t. Scrape samples and ledger reads both use that definition.
class Simulator {
public:
    /// Throws ValidationError on an invalid topology or settings.
    Simulator(TopologySpec topology, SimSettings settings);

    /// Returns 200, or 404 (no accrual) for an unknown route.
    int handle_request(const std::string& route);

    /// dt must be > 0 (DomainError otherwise).
    void advance_clock(TimestampMs dt);
    /// No-op when t <= now().
    void advance_to(TimestampMs t);
    TimestampMs now() const;

    /// Recorded scrape samples inside the window, one series per matching container.
    /// Unknown metrics give an empty result; a malformed selector throws ParseError.
    std::vector<MetricSeries> query_range(const std::string& selector,
                                          const TimeWindow& window) const;

    std::vector<LedgerRow> ledger() const;
    /// Throws ValidationError when t is beyond the simulated time.
    std::vector<LedgerRow> ledger_at(TimestampMs t) const;

    /// Core model applied to exact ledger deltas. Accepts start == end.
    std::vector<ServiceEnergyBreakdown> ledger_breakdowns(const TimeWindow& window,
                                                          const EnergyIntensityFactors& f) const;

    /// Exact per-container deltas, sorted by container_id (the pipeline's order).
    std::vector<ContainerUsage> ledger_usages(const TimeWindow& window) const;

    StorageSnapshot storage_snapshot() const;

    SimSettings settings() const;
    void set_trace_sampling(double fraction);
    void set_scrape_interval(double seconds);
    void set_mesh(bool enabled);

    const TopologySpec& topology() const { return topology_; }
    std::uint64_t requests_handled() const;
    std::vector<TimestampMs> scrape_times() const;
    /// Every settings change, "name=value" in order.
    std::vector<std::string> mutation_log() const;

private:
    struct Counters {
        double request_joules = 0.0;
        std::uint64_t request_rx = 0;
        std::uint64_t fs_writes = 0;
    };
    struct Checkpoint {
        TimestampMs at = 0;
        Counters after;
    };
    struct Container {
        std::string service;
        std::string pod;
        std::string name;
        std::string id;
        const ServiceNode* node = nullptr;
        Counters current;
        std::vector<Checkpoint> history;  // counters after all requests at `at`
        double reset_joules = 0.0;
        std::uint64_t reset_rx = 0;
        std::uint64_t reset_fs = 0;
        std::vector<MetricSample> joules, rx, fs;
    };
    struct Values {
        double joules = 0.0;
        std::uint64_t rx = 0;
        std::uint64_t fs = 0;
    };

    Values values_at(const Container& c, TimestampMs t) const;
    Counters counters_before(const Container& c, TimestampMs t) const;
    std::uint64_t scrapes_through(TimestampMs t) const;
    void scrape_locked();
    void touch(Container& c);
    Container& pick(const std::string& service);
    void visit(const std::string& service, bool sampled, std::vector<std::string>& visited);
    LedgerRow row_for(const std::string& service, TimestampMs t) const;
    std::vector<LedgerRow> ledger_locked(TimestampMs t) const;
    TimestampMs next_multiple_after(TimestampMs t) const;

    TopologySpec topology_;
    SimSettings settings_;
    mutable std::mutex mu_;
    TimestampMs now_ = 0;
    TimestampMs scrape_interval_ms_ = 0;
    TimestampMs next_scrape_ = 0;
    std::vector<TimestampMs> scrape_times_;  // excludes the initial sample at 0
    std::vector<Container> containers_;      // sorted by id
    std::map<std::string, std::vector<std::size_t>> by_service_;
    std::map<std::string, std::size_t> round_robin_;
    std::map<std::string, std::vector<std::string>> callees_;  // expanded by call count
    std::mt19937_64 rng_;
    std::uint64_t requests_ = 0;
    std::vector<std::string> mutations_;
};

/// Label-set style selector: metric_name{key="value",...}.
struct Selector {
    std::string metric;
    std::map<std::string, std::string> matchers;

    /// Throws ParseError.
    static Selector parse(const std::string& text);
};

/// Exposes a Simulator through the metric query and load-target interfaces.
class SimMetricSource final : public MetricSource {
public:
    explicit SimMetricSource(Simulator& sim) : sim_(&sim) {}
    std::vector<MetricSeries> query_range(const ResponseQuery& query,
                                          const TimeWindow& window) override;
    bool preflight() override { return healthy_; }
    void rebind(Simulator& sim) { sim_ = &sim; }
    void set_healthy(bool healthy) { healthy_ = healthy; }

private:
    Simulator* sim_;
    bool healthy_ = true;
};

class SimClock final : public Clock {
public:
    explicit SimClock(Simulator& sim) : sim_(&sim) {}
    TimestampMs now() const override { return sim_->now(); }
    void sleep_until(TimestampMs t) override { sim_->advance_to(t); }
    void rebind(Simulator& sim) { sim_ = &sim; }

private:
    Simulator* sim_;
};

/// Simulated environment: "clean" rebuilds the simulator from its base settings;
/// treatment actions mutate the live settings.
class SimEnvironment final : public Environment {
public:
    SimEnvironment(TopologySpec topology, SimSettings base_settings);
    ~SimEnvironment() override;

    EnvironmentKind kind() const override { return EnvironmentKind::simulated; }
    ActionResult execute(const ActionDescriptor& action) override;

    Clock& clock() override { return clock_; }
    MetricSource& metrics() override { return source_; }
    LoadTarget& load_target(const LoadProfile& profile) override;
    bool inline_load() const override { return true; }
    StorageSnapshot storage_snapshot() override;

    Simulator& simulator() { return *sim_; }
    const Simulator& simulator() const { return *sim_; }
    /// Every action executed, rendered, in order.
    const std::vector<std::string>& action_log() const { return actions_; }
    /// Makes preflight fail (test hook for the failure path).
    void set_healthy(bool healthy) {
        healthy_ = healthy;
        source_.set_healthy(healthy);
    }
    bool healthy() const { return healthy_; }

private:
    class Target;

    TopologySpec topology_;
    SimSettings base_;
    std::unique_ptr<Simulator> sim_;
    SimClock clock_;
    SimMetricSource source_;
    std::unique_ptr<Target> target_;
    std::vector<std::string> actions_;
    bool healthy_ = true;
};

struct ServeOptions {
    /// Added to simulated timestamps on the wire (and subtracted from query bounds).
    TimestampMs origin_ms = 0;
    /// Advance the simulated clock with wall time in the background.
    bool realtime = false;
};

/// HTTP front for a simulator: topology routes plus /api/v1/query_range.
class SimServer {
public:
    ~SimServer();
    SimServer(const SimServer&) = delete;
    SimServer& operator=(const SimServer&) = delete;

    int port() const;
    std::string base_url() const;
    void stop();
    /// Blocks until stop() is called from elsewhere.
    void wait();

private:
    friend std::unique_ptr<SimServer> serve_http(Simulator&, const std::string&, ServeOptions);
    SimServer();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Binds "host:port" (port 0 picks a free one). Throws EnvironmentError on bind failure.
std::unique_ptr<SimServer> serve_http(Simulator& sim, const std::string& bind_address,
                                      ServeOptions options = {});

}  // namespace goxn::sim
