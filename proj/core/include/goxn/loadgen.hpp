#pragma once

// Open-loop constant-rate load driver.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "goxn/clock.hpp"
#include "goxn/time.hpp"

namespace goxn {

struct WeightedRoute {
    std::string path;
    double weight = 1.0;

    friend bool operator==(const WeightedRoute&, const WeightedRoute&) = default;
};

struct LoadProfile {
    std::string target;  // base URL, or "sim:<topology>" for the in-process simulator
    std::vector<WeightedRoute> routes;
    double rate = 10.0;      // requests per second
    double duration = 60.0;  // seconds
    int max_in_flight = 64;
    std::uint64_t seed = 1;

    /// Throws ValidationError when an invariant is broken.
    void validate() const;

    /// 10 req/s against the recommendation route.
    static LoadProfile defaults(std::string target, double duration);

    friend bool operator==(const LoadProfile&, const LoadProfile&) = default;
};

inline constexpr const char* kRecommendationRoute = "/api/recommendations";

struct LoadStats {
    std::uint64_t sent = 0;
    std::uint64_t completed = 0;
    std::uint64_t failed = 0;
    double latency_p50 = 0.0;  // seconds
    double latency_p95 = 0.0;
    double latency_p99 = 0.0;
    double actual_rate = 0.0;

    friend bool operator==(const LoadStats&, const LoadStats&) = default;
};

/// Where requests go. send() returns true for a successful response.
class LoadTarget {
public:
    virtual ~LoadTarget() = default;
    virtual bool send(const std::string& path) = 0;
};

/// Plain HTTP GET against a base URL. Connection failures count as failed requests.
class HttpLoadTarget final : public LoadTarget {
public:
    explicit HttpLoadTarget(std::string base_url, double timeout_seconds = 5.0);
    bool send(const std::string& path) override;

private:
    std::string base_url_;
    double timeout_seconds_;
};

struct DispatchRecord {
    TimestampMs at = 0;
    std::string path;
    bool shed = false;

    friend bool operator==(const DispatchRecord&, const DispatchRecord&) = default;
};

struct LoadOptions {
    /// Execute each request on the dispatcher thread. Used with the simulator so
    /// request handling interleaves deterministically with simulated time.
    bool inline_execution = false;
    /// When set, receives every dispatch in order.
    std::vector<DispatchRecord>* trace = nullptr;
};

/// Seeded weighted route draw, exposed so tests can replay the sequence.
class RouteSampler {
public:
    RouteSampler(const std::vector<WeightedRoute>& routes, std::uint64_t seed);
    const std::string& next();

private:
    std::vector<WeightedRoute> routes_;
    std::vector<double> cumulative_;
    std::mt19937_64 rng_;
};

/// Request k is dispatched at start + k / rate for every k with that instant
/// before start + duration. When max_in_flight requests are outstanding, the
/// request is shed and counted as failed. Returns once all requests finished
/// and the clock has reached start + duration.
LoadStats run_load(const LoadProfile& profile, LoadTarget& target, Clock& clock,
                   const LoadOptions& options = {});

}  // namespace goxn
