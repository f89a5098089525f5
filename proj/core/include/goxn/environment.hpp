#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "goxn/clock.hpp"
#include "goxn/loadgen.hpp"
#include "goxn/metrics.hpp"
#include "goxn/treatments.hpp"

namespace goxn {

/// Everything an experiment touches: the action executor treatments use, a clock,
/// a metric source, a load target and storage snapshots.
///
/// Lifecycle actions the runner sends through execute(): "clean" and "setup".
class Environment : public EnvironmentHandle {
public:
    virtual Clock& clock() = 0;
    virtual MetricSource& metrics() = 0;
    virtual LoadTarget& load_target(const LoadProfile& profile) = 0;
    /// True when requests must run on the dispatcher thread (simulated time).
    virtual bool inline_load() const = 0;
    virtual StorageSnapshot storage_snapshot() = 0;
};

/// Live mode: actions are piped to a user command, metrics come from a
/// Prometheus-compatible endpoint, load goes over HTTP, time is wall time.
///
/// The command template runs through /bin/sh once per action with the rendered
/// action line on stdin. "{action}" in the template is replaced by the action
/// name. Exit status 0 means success; stdout lines "k=v" become result values.
/// For "storage_snapshot", stdout lines "container_id,bytes_used" form the snapshot.
class ExternalCommandEnvironment final : public Environment {
public:
    ExternalCommandEnvironment(std::string command_template, std::string prometheus_endpoint,
                               RetryPolicy retry = {});

    EnvironmentKind kind() const override { return EnvironmentKind::external_command; }
    ActionResult execute(const ActionDescriptor& action) override;

    Clock& clock() override { return clock_; }
    MetricSource& metrics() override { return client_; }
    LoadTarget& load_target(const LoadProfile& profile) override;
    bool inline_load() const override { return false; }
    StorageSnapshot storage_snapshot() override;

private:
    std::string command_template_;
    WallClock clock_;
    PrometheusClient client_;
    std::unique_ptr<HttpLoadTarget> target_;
};

}  // namespace goxn
