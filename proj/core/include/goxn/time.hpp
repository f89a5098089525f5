#pragma once

#include <cstdint>
#include <string>

namespace goxn {

/// Epoch milliseconds, UTC. Every timestamp in the engine uses this resolution.
using TimestampMs = std::int64_t;

constexpr TimestampMs seconds_to_ms(double seconds) {
    return static_cast<TimestampMs>(seconds * 1000.0 + (seconds >= 0 ? 0.5 : -0.5));
}

constexpr double ms_to_seconds(TimestampMs ms) { return static_cast<double>(ms) / 1000.0; }

/// Closed interval [start, end] with start < end.
struct TimeWindow {
    TimestampMs start = 0;
    TimestampMs end = 0;

    /// Throws ValidationError unless start < end.
    static TimeWindow make(TimestampMs start, TimestampMs end);

    TimestampMs length() const { return end - start; }
    bool contains(TimestampMs t) const { return t >= start && t <= end; }

    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

/// "12.345" style rendering of a millisecond timestamp, exact and locale free.
std::string format_seconds(TimestampMs ms);

/// Inverse of format_seconds; accepts up to three fractional digits.
TimestampMs parse_seconds(const std::string& text);

}  // namespace goxn
