#include <atomic>
#include <thread>

#include <gtest/gtest.h>

#include "goxn/clock.hpp"
#include "goxn/error.hpp"
#include "goxn/loadgen.hpp"
#include "goxn/simenv.hpp"

using namespace goxn;

namespace {

class CountingTarget final : public LoadTarget {
public:
    std::map<std::string, int> hits;
    bool answer = true;
    bool send(const std::string& path) override {
        ++hits[path];
        return answer;
    }
};

LoadProfile profile(double rate, double duration, std::vector<WeightedRoute> routes = {{"/a", 1.0}}) {
    LoadProfile p;
    p.target = "sim:test";
    p.routes = std::move(routes);
    p.rate = rate;
    p.duration = duration;
    return p;
}

}  // namespace

TEST(Profile, Validation) {
    EXPECT_NO_THROW(profile(10, 60).validate());
    EXPECT_THROW(profile(0, 60).validate(), ValidationError);
    EXPECT_THROW(profile(10, 0).validate(), ValidationError);
    EXPECT_THROW(profile(0.5, 1).validate(), ValidationError);
    EXPECT_THROW(profile(10, 60, {{"/a", 0.0}}).validate(), ValidationError);
    EXPECT_THROW(profile(10, 60, {}).validate(), ValidationError);
    auto p = profile(10, 60);
    p.max_in_flight = 0;
    EXPECT_THROW(p.validate(), ValidationError);
    const auto d = LoadProfile::defaults("http://x", 30);
    EXPECT_EQ(d.rate, 10.0);
    EXPECT_EQ(d.routes.front().path, kRecommendationRoute);
}

TEST(Run, SixHundredRequestsInSixtySeconds) {
    ManualClock clock;
    CountingTarget target;
    LoadOptions opts;
    opts.inline_execution = true;
    const auto stats = run_load(profile(10, 60), target, clock, opts);
    EXPECT_EQ(stats.sent, 600u);
    EXPECT_EQ(stats.completed, 600u);
    EXPECT_EQ(stats.failed, 0u);
    EXPECT_NEAR(stats.actual_rate, 10.0, 0.2);
    EXPECT_EQ(clock.now(), 60000);
    EXPECT_LE(stats.latency_p50, stats.latency_p95);
    EXPECT_LE(stats.latency_p95, stats.latency_p99);
}

TEST(Run, ScheduleIsOpenLoop) {
    ManualClock clock;
    std::vector<DispatchRecord> trace;
    LoadOptions opts;
    opts.inline_execution = true;
    opts.trace = &trace;
    // A slow target that burns simulated time while handling each request.
    class Slow final : public LoadTarget {
    public:
        explicit Slow(ManualClock& c) : clock_(c) {}
        bool send(const std::string&) override {
            clock_.set(clock_.now() + 40);
            return true;
        }

    private:
        ManualClock& clock_;
    } slow(clock);
    run_load(profile(10, 2), slow, clock, opts);
    ASSERT_EQ(trace.size(), 20u);
    for (std::size_t k = 0; k < trace.size(); ++k) EXPECT_EQ(trace[k].at, static_cast<TimestampMs>(k) * 100);
}

TEST(Run, SingleRouteGetsEverything) {
    ManualClock clock;
    CountingTarget target;
    LoadOptions opts;
    opts.inline_execution = true;
    run_load(profile(7, 10), target, clock, opts);
    EXPECT_EQ(target.hits.size(), 1u);
    EXPECT_EQ(target.hits["/a"], 70);
}

TEST(Run, WeightedDrawWithinBinomialBound) {
    RouteSampler sampler({{"/a", 1.0}, {"/b", 1.0}}, 42);
    int a = 0;
    for (int i = 0; i < 10000; ++i) a += sampler.next() == "/a";
    EXPECT_GE(a, 4700);
    EXPECT_LE(a, 5300);
}

TEST(Run, SameSeedSameSequence) {
    auto run = [](std::uint64_t seed) {
        ManualClock clock;
        CountingTarget target;
        std::vector<DispatchRecord> trace;
        LoadOptions opts;
        opts.inline_execution = true;
        opts.trace = &trace;
        auto p = profile(20, 5, {{"/a", 1.0}, {"/b", 2.0}, {"/c", 0.5}});
        p.seed = seed;
        run_load(p, target, clock, opts);
        std::vector<std::string> paths;
        for (const auto& r : trace) paths.push_back(r.path);
        return paths;
    };
    EXPECT_EQ(run(3), run(3));
    EXPECT_NE(run(3), run(4));
}

TEST(Run, UnreachableTargetCountsFailures) {
    ManualClock clock;
    CountingTarget target;
    target.answer = false;
    LoadOptions opts;
    opts.inline_execution = true;
    const auto stats = run_load(profile(10, 3), target, clock, opts);
    EXPECT_EQ(stats.sent, 30u);
    EXPECT_EQ(stats.failed, 30u);
    EXPECT_EQ(stats.completed, 0u);
}

TEST(Run, InFlightCapSheds) {
    // Worker pool with a target that blocks until released: once the cap is
    // reached, later dispatches are shed instead of queued.
    ManualClock clock;
    std::atomic<bool> release{false};
    class Blocking final : public LoadTarget {
    public:
        explicit Blocking(std::atomic<bool>& r) : release_(r) {}
        bool send(const std::string&) override {
            while (!release_) std::this_thread::sleep_for(std::chrono::milliseconds(1));
            return true;
        }

    private:
        std::atomic<bool>& release_;
    } target(release);
    auto p = profile(10, 1);
    p.max_in_flight = 2;
    std::vector<DispatchRecord> trace;
    LoadOptions opts;
    opts.trace = &trace;
    std::thread releaser([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        release = true;
    });
    const auto stats = run_load(p, target, clock, opts);
    releaser.join();
    EXPECT_EQ(stats.sent, 10u);
    EXPECT_EQ(stats.completed, 2u);
    EXPECT_EQ(stats.failed, 8u);
    EXPECT_LE(stats.completed + stats.failed, stats.sent);
}

TEST(Run, HttpTargetUnreachable) {
    HttpLoadTarget target("http://127.0.0.1:1", 0.2);
    EXPECT_FALSE(target.send("/x"));
    EXPECT_THROW(HttpLoadTarget("not a url"), ValidationError);
}
