#include "goxn/loadgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>

#include "goxn/error.hpp"
#include "http.hpp"

namespace goxn {

void LoadProfile::validate() const {
    if (target.empty()) throw ValidationError("load.target is empty");
    if (routes.empty()) throw ValidationError("load.routes needs at least one route");
    for (const auto& r : routes) {
        if (r.path.empty() || r.path.front() != '/') {
            throw ValidationError("load route '" + r.path + "' must start with '/'");
        }
        if (!(r.weight > 0.0) || !std::isfinite(r.weight)) {
            throw ValidationError("load route '" + r.path + "' needs a positive weight");
        }
    }
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("load.rate must be > 0");
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw ValidationError("load duration must be > 0");
    }
    if (rate * duration < 1.0) throw ValidationError("load rate x duration must be >= 1 request");
    if (max_in_flight < 1) throw ValidationError("load.max_in_flight must be >= 1");
}

LoadProfile LoadProfile::defaults(std::string target, double duration) {
    LoadProfile p;
    p.target = std::move(target);
    p.routes = {{kRecommendationRoute, 1.0}};
    p.duration = duration;
    return p;
}

HttpLoadTarget::HttpLoadTarget(std::string base_url, double timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
    detail::split_url(base_url_);
}

bool HttpLoadTarget::send(const std::string& path) {
    const auto response = detail::http_get(base_url_, path, {}, timeout_seconds_);
    return response && response->status >= 200 && response->status < 300;
}

RouteSampler::RouteSampler(const std::vector<WeightedRoute>& routes, std::uint64_t seed)
    : routes_(routes), rng_(seed) {
    if (routes_.empty()) throw ValidationError("route sampler needs at least one route");
    double total = 0.0;
    for (const auto& r : routes_) {
        total += r.weight;
        cumulative_.push_back(total);
    }
}

const std::string& RouteSampler::next() {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53 * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                           routes_.size() - 1);
    return routes_[idx].path;
}

namespace {

class WorkerPool {
public:
    explicit WorkerPool(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            threads_.emplace_back([this] { loop(); });
        }
    }
    ~WorkerPool() { drain(); }

    void submit(std::function<void()> job) {
        {
            std::lock_guard lock(mu_);
            jobs_.push_back(std::move(job));
        }
        cv_.notify_one();
    }

    void drain() {
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) {
            if (t.joinable()) t.join();
        }
    }

private:
    void loop() {
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
                if (jobs_.empty()) return;
                job = std::move(jobs_.front());
                jobs_.pop_front();
            }
            job();
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> jobs_;
    std::vector<std::thread> threads_;
    bool stopping_ = false;
};

double nearest_rank(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace

LoadStats run_load(const LoadProfile& profile, LoadTarget& target, Clock& clock,
                   const LoadOptions& options) {
    profile.validate();
    RouteSampler sampler(profile.routes, profile.seed);

    const TimestampMs start = clock.now();
    const TimestampMs end = start + seconds_to_ms(profile.duration);
    const double interval_ms = 1000.0 / profile.rate;

    std::mutex stats_mu;
    LoadStats stats;
    std::vector<double> latencies;
    std::atomic<int> in_flight{0};

    auto execute = [&](const std::string& path) {
        const TimestampMs t0 = clock.now();
        const bool ok = target.send(path);
        const TimestampMs t1 = clock.now();
        std::lock_guard lock(stats_mu);
        if (ok) {
            ++stats.completed;
            latencies.push_back(ms_to_seconds(t1 - t0));
        } else {
            ++stats.failed;
        }
    };

    std::unique_ptr<WorkerPool> pool;
    if (!options.inline_execution) {
        pool = std::make_unique<WorkerPool>(
            static_cast<std::size_t>(std::min(profile.max_in_flight, 256)));
    }

    for (std::uint64_t k = 0;; ++k) {
        const TimestampMs due =
            start + static_cast<TimestampMs>(std::llround(static_cast<double>(k) * interval_ms));
        if (due >= end) break;
        clock.sleep_until(due);
        const std::string& path = sampler.next();
        const bool shed = in_flight.load() >= profile.max_in_flight;
        {
            std::lock_guard lock(stats_mu);
            ++stats.sent;
            if (shed) ++stats.failed;
        }
        if (options.trace) options.trace->push_back({due, path, shed});
        if (shed) continue;

        if (options.inline_execution) {
            execute(path);
        } else {
            ++in_flight;
            pool->submit([&, path] {
                execute(path);
                --in_flight;
            });
        }
    }
    if (pool) pool->drain();
    clock.sleep_until(end);

    std::sort(latencies.begin(), latencies.end());
    stats.latency_p50 = nearest_rank(latencies, 0.50);
    stats.latency_p95 = nearest_rank(latencies, 0.95);
    stats.latency_p99 = nearest_rank(latencies, 0.99);
    stats.actual_rate = static_cast<double>(stats.sent) / profile.duration;
    return stats;
}

}  // namespace goxn
