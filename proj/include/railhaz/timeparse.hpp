#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace railhaz::io {

// Operational times are minute-resolution throughout; a timestamp is the
// count of minutes since 1970-01-01T00:00 (civil, no zone handling).
using minutes_t = std::int64_t;

// "yyyy-mm-dd" -> minutes at midnight of that day.
std::optional<minutes_t> parse_date(std::string_view s);

// "hh:mm" -> minute of day (0..1439). Rejects out-of-range fields.
std::optional<int> parse_hhmm(std::string_view s);

// Accepts "yyyy-mm-ddThh:mm", "yyyy-mm-dd hh:mm", or "hh:mm" combined with
// day_base (midnight minutes of the run's departure date).
std::optional<minutes_t> parse_time(std::string_view s, minutes_t day_base);

std::string format_time(minutes_t t);      // yyyy-mm-ddThh:mm
std::string format_date(minutes_t t);      // yyyy-mm-dd

// Nearest hour start, minute 30 rounding up.
minutes_t round_to_hour(minutes_t t);

}  // namespace railhaz::io
