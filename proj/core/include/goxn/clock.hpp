#pragma once

#include <atomic>

#include "goxn/time.hpp"

namespace goxn {

/// Time source for schedules. Wall time for live runs, simulated time for the sim.
class Clock {
public:
    virtual ~Clock() = default;
    virtual TimestampMs now() const = 0;
    /// Blocks (or advances simulated time) until now() >= t.
    virtual void sleep_until(TimestampMs t) = 0;
};

class WallClock final : public Clock {
public:
    TimestampMs now() const override;
    void sleep_until(TimestampMs t) override;
};

/// Test clock: sleep_until jumps straight to the target.
class ManualClock final : public Clock {
public:
    explicit ManualClock(TimestampMs start = 0) : now_(start) {}

    TimestampMs now() const override { return now_.load(); }
    void sleep_until(TimestampMs t) override;
    void set(TimestampMs t) { now_.store(t); }

private:
    std::atomic<TimestampMs> now_;
};

}  // namespace goxn
