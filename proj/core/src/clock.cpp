#include "goxn/clock.hpp"

#include <chrono>
#include <thread>

namespace goxn {

TimestampMs WallClock::now() const {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void WallClock::sleep_until(TimestampMs t) {
    const auto remaining = t - now();
    if (remaining > 0) std::this_thread::sleep_for(std::chrono::milliseconds(remaining));
}

void ManualClock::sleep_until(TimestampMs t) {
    TimestampMs current = now_.load();
    while (current < t && !now_.compare_exchange_weak(current, t)) {
    }
}

}  // namespace goxn
