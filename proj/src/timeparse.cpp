#include "railhaz/timeparse.hpp"

#include <cstdio>

namespace railhaz::io {

namespace {

// Civil-calendar day number algorithms (proleptic Gregorian).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  std::int64_t const era = (y >= 0 ? y : y - 399) / 400;
  unsigned const yoe = static_cast<unsigned>(y - era * 400);
  unsigned const doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned const doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  std::int64_t const era = (z >= 0 ? z : z - 146096) / 146097;
  unsigned const doe = static_cast<unsigned>(z - era * 146097);
  unsigned const yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t const yr = static_cast<std::int64_t>(yoe) + era * 400;
  unsigned const doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  unsigned const mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yr + (m <= 2));
}

bool all_digits(std::string_view s) {
  for (char const c : s) {
    if (c < '0' || c > '9') {
      return false;
    }
  }
  return !s.empty();
}

int to_int(std::string_view s) {
  int v = 0;
  for (char const c : s) {
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

std::optional<minutes_t> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    return std::nullopt;
  }
  auto const ys = s.substr(0, 4), ms = s.substr(5, 2), ds = s.substr(8, 2);
  if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) {
    return std::nullopt;
  }
  int const y = to_int(ys), m = to_int(ms), d = to_int(ds);
  if (m < 1 || m > 12 || d < 1 || d > 31) {
    return std::nullopt;
  }
  // Round trip rejects days past the month's end (e.g. Feb 29 off-cycle),
  // which days_from_civil would otherwise wrap into the next month.
  auto const day = days_from_civil(y, m, d);
  int ry, rm, rd;
  civil_from_days(day, ry, rm, rd);
  if (ry != y || rm != m || rd != d) {
    return std::nullopt;
  }
  return day * 1440;
}

std::optional<int> parse_hhmm(std::string_view s) {
  if (s.size() != 5 || s[2] != ':') {
    return std::nullopt;
  }
  auto const hs = s.substr(0, 2), ms = s.substr(3, 2);
  if (!all_digits(hs) || !all_digits(ms)) {
    return std::nullopt;
  }
  int const h = to_int(hs), m = to_int(ms);
  if (h > 23 || m > 59) {
    return std::nullopt;
  }
  return h * 60 + m;
}

std::optional<minutes_t> parse_time(std::string_view s, minutes_t day_base) {
  if (s.size() == 16 && (s[10] == 'T' || s[10] == ' ')) {
    auto const date = parse_date(s.substr(0, 10));
    auto const tod = parse_hhmm(s.substr(11));
    if (!date || !tod) {
      return std::nullopt;
    }
    return *date + *tod;
  }
  if (auto const tod = parse_hhmm(s)) {
    return day_base + *tod;
  }
  return std::nullopt;
}

std::string format_time(minutes_t t) {
  auto const day = t >= 0 ? t / 1440 : (t - 1439) / 1440;
  int const tod = static_cast<int>(t - day * 1440);
  int y, m, d;
  civil_from_days(day, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d", y, m, d,
                tod / 60, tod % 60);
  return buf;
}

std::string format_date(minutes_t t) {
  return format_time(t).substr(0, 10);
}

minutes_t round_to_hour(minutes_t t) {
  auto const shifted = t + 30;
  auto const hour = shifted >= 0 ? shifted / 60 : (shifted - 59) / 60;
  return hour * 60;
}

}  // namespace railhaz::io
