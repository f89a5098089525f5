#include "goxn/time.hpp"

#include <charconv>
#include <cstdlib>

#include "goxn/error.hpp"

namespace goxn {

TimeWindow TimeWindow::make(TimestampMs start, TimestampMs end) {
    if (!(start < end)) {
        throw ValidationError("time window requires start < end (got " + format_seconds(start) +
                              ", " + format_seconds(end) + ")");
    }
    return TimeWindow{start, end};
}

std::string format_seconds(TimestampMs ms) {
    const bool negative = ms < 0;
    const auto magnitude = static_cast<std::uint64_t>(negative ? -ms : ms);
    std::string frac = std::to_string(magnitude % 1000);
    frac.insert(0, 3 - frac.size(), '0');
    return (negative ? "-" : "") + std::to_string(magnitude / 1000) + "." + frac;
}

TimestampMs parse_seconds(const std::string& text) {
    std::string_view s = text;
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    const auto dot = s.find('.');
    const std::string_view whole = s.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    if (whole.empty() || frac.size() > 3 || (dot != std::string_view::npos && frac.empty())) {
        throw ParseError("bad timestamp '" + text + "'");
    }
    std::int64_t secs = 0;
    auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), secs);
    if (ec != std::errc{} || p != whole.data() + whole.size()) {
        throw ParseError("bad timestamp '" + text + "'");
    }
    std::int64_t millis = 0;
    if (!frac.empty()) {
        std::string padded(frac);
        padded.append(3 - padded.size(), '0');
        auto [q, ec2] = std::from_chars(padded.data(), padded.data() + 3, millis);
        if (ec2 != std::errc{} || q != padded.data() + 3) {
            throw ParseError("bad timestamp '" + text + "'");
        }
    }
    const TimestampMs value = secs * 1000 + millis;
    return negative ? -value : value;
}

}  // namespace goxn
