#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <regex>
#include <string>
#include <string_view>

#include "error.hpp"
#include "types.hpp"

namespace otalign {

using Instant = std::chrono::sys_time<std::chrono::milliseconds>;

/// A UTC instant plus the offset it was written with.
struct Timestamp {
  Instant utc;
  std::chrono::minutes offset{0};

  friend bool operator==(const Timestamp& a, const Timestamp& b) { return a.utc == b.utc; }
  friend auto operator<=>(const Timestamp& a, const Timestamp& b) { return a.utc <=> b.utc; }
};

namespace detail {

inline int to_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorCode::MalformedInput, "bad integer field '" + std::string(s) + "'");
  }
  return v;
}

inline Date make_date(int y, int m, int d, std::string_view text) {
  Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
            std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw Error(ErrorCode::MalformedInput, "invalid date '" + std::string(text) + "'");
  return date;
}

}  // namespace detail

inline Date parse_date(std::string_view text) {
  static const std::regex re(R"((\d{4})-(\d{2})-(\d{2}))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(text.begin(), text.end(), m, re)) {
    throw Error(ErrorCode::MalformedInput, "expected YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  auto part = [&](int i) { return std::string_view(&*m[i].first, m[i].length()); };
  return detail::make_date(detail::to_int(part(1)), detail::to_int(part(2)),
                           detail::to_int(part(3)), text);
}

inline std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

inline int year_of(Date d) { return static_cast<int>(d.year()); }

/// RFC 3339 timestamp; the offset (`Z` or `±HH:MM`) is mandatory.
inline Timestamp parse_timestamp(std::string_view text) {
  static const std::regex re(
      R"((\d{4})-(\d{2})-(\d{2})[Tt ](\d{2}):(\d{2}):(\d{2})(\.\d+)?([Zz]|([+-])(\d{2}):(\d{2})))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(text.begin(), text.end(), m, re)) {
    throw Error(ErrorCode::MalformedInput,
                "expected RFC 3339 timestamp with offset, got '" + std::string(text) + "'");
  }
  auto part = [&](int i) { return std::string_view(&*m[i].first, m[i].length()); };
  using namespace std::chrono;
  Date date = detail::make_date(detail::to_int(part(1)), detail::to_int(part(2)),
                                detail::to_int(part(3)), text);
  int hh = detail::to_int(part(4)), mm = detail::to_int(part(5)), ss = detail::to_int(part(6));
  if (hh > 23 || mm > 59 || ss > 60) {
    throw Error(ErrorCode::MalformedInput, "time of day out of range in '" + std::string(text) + "'");
  }
  milliseconds frac{0};
  if (m[7].matched) {
    std::string digits(part(7).substr(1));
    digits.resize(3, '0');
    frac = milliseconds{detail::to_int(digits)};
  }
  minutes offset{0};
  if (m[9].matched) {
    offset = hours{detail::to_int(part(10))} + minutes{detail::to_int(part(11))};
    if (part(9) == "-") offset = -offset;
  }
  auto local = sys_days{date} + hours{hh} + minutes{mm} + seconds{ss} + frac;
  return Timestamp{time_point_cast<milliseconds>(local - offset), offset};
}

inline std::string format_timestamp(const Timestamp& ts) {
  using namespace std::chrono;
  auto local = ts.utc + ts.offset;
  auto day = floor<days>(local);
  hh_mm_ss tod{local - day};
  char buf[64];
  long off = ts.offset.count();
  char sign = off < 0 ? '-' : '+';
  off = off < 0 ? -off : off;
  std::string date = format_date(Date{day});
  if (tod.subseconds().count() != 0) {
    std::snprintf(buf, sizeof buf, "%sT%02ld:%02ld:%02ld.%03ld%c%02ld:%02ld", date.c_str(),
                  static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                  static_cast<long>(tod.seconds().count()),
                  static_cast<long>(tod.subseconds().count()), sign, off / 60, off % 60);
  } else {
    std::snprintf(buf, sizeof buf, "%sT%02ld:%02ld:%02ld%c%02ld:%02ld", date.c_str(),
                  static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                  static_cast<long>(tod.seconds().count()), sign, off / 60, off % 60);
  }
  return buf;
}

}  // namespace otalign
