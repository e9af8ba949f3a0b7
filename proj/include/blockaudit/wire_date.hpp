#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "blockaudit/error.hpp"

namespace blockaudit {

// A UTC instant plus the UTC offset of the writer's local clock.
//
// Legacy rendering is the .NET JSON form `/Date(<ms><+-HHMM>)/` where <ms>
// counts UTC milliseconds since the epoch and the offset is informational.
// ISO rendering shows the local wall time with its offset,
// e.g. `2018-07-23T13:19:20.155-04:00`.
struct WireDate {
  std::int64_t epoch_ms = 0;
  std::int32_t offset_minutes = 0;

  static constexpr std::int32_t kMaxOffsetMinutes = 14 * 60;

  friend bool operator==(const WireDate&, const WireDate&) = default;
};

namespace detail {

inline std::string render_offset(std::int32_t minutes, bool with_colon) {
  char sign = minutes < 0 ? '-' : '+';
  std::int32_t abs_min = minutes < 0 ? -minutes : minutes;
  char buf[16];
  if (with_colon)
    std::snprintf(buf, sizeof buf, "%c%02d:%02d", sign, abs_min / 60, abs_min % 60);
  else
    std::snprintf(buf, sizeof buf, "%c%02d%02d", sign, abs_min / 60, abs_min % 60);
  return buf;
}

inline bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

inline int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

inline void check_offset(std::int32_t minutes, std::string_view text) {
  if (minutes < -WireDate::kMaxOffsetMinutes || minutes > WireDate::kMaxOffsetMinutes)
    throw Error(ErrorCode::BadDate, "offset out of range in '" + std::string(text) + "'");
}

}  // namespace detail

inline std::string render_legacy(const WireDate& d) {
  return "/Date(" + std::to_string(d.epoch_ms) + detail::render_offset(d.offset_minutes, false) +
         ")/";
}

inline std::string render_iso8601(const WireDate& d) {
  using namespace std::chrono;
  sys_time<milliseconds> local{milliseconds{d.epoch_ms + std::int64_t{d.offset_minutes} * 60'000}};
  auto day = floor<days>(local);
  year_month_day ymd{day};
  hh_mm_ss tod{local - day};
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()),
                static_cast<int>(tod.subseconds().count()));
  return std::string(buf) + detail::render_offset(d.offset_minutes, true);
}

inline WireDate parse_legacy_date(std::string_view text) {
  auto fail = [&]() -> WireDate {
    throw Error(ErrorCode::BadDate, "unparseable legacy date '" + std::string(text) + "'");
  };
  constexpr std::string_view prefix = "/Date(";
  constexpr std::string_view suffix = ")/";
  if (!text.starts_with(prefix) || !text.ends_with(suffix)) return fail();
  std::string_view body = text.substr(prefix.size(), text.size() - prefix.size() - suffix.size());
  bool negative = false;
  if (!body.empty() && body.front() == '-') {
    negative = true;
    body.remove_prefix(1);
  }
  std::size_t digits = 0;
  while (digits < body.size() && body[digits] >= '0' && body[digits] <= '9') ++digits;
  if (digits == 0 || digits > 18) return fail();
  std::int64_t ms = 0;
  for (std::size_t i = 0; i < digits; ++i) ms = ms * 10 + (body[i] - '0');
  WireDate d{negative ? -ms : ms, 0};
  std::string_view tail = body.substr(digits);
  if (!tail.empty()) {
    if (tail.size() != 5 || (tail[0] != '+' && tail[0] != '-') ||
        !detail::all_digits(tail.substr(1)))
      return fail();
    int hh = detail::to_int(tail.substr(1, 2));
    int mm = detail::to_int(tail.substr(3, 2));
    if (mm >= 60) return fail();
    d.offset_minutes = (tail[0] == '-' ? -1 : 1) * (hh * 60 + mm);
    detail::check_offset(d.offset_minutes, text);
  }
  return d;
}

// YYYY-MM-DDTHH:MM:SS[.f{1,3}](Z|+-HH:MM)
inline WireDate parse_iso8601_date(std::string_view text) {
  using namespace std::chrono;
  auto fail = [&]() -> WireDate {
    throw Error(ErrorCode::BadDate, "unparseable ISO-8601 date '" + std::string(text) + "'");
  };
  if (text.size() < 20) return fail();
  auto field = [&](std::size_t pos, std::size_t len) -> int {
    auto part = text.substr(pos, len);
    if (!detail::all_digits(part)) fail();
    return detail::to_int(part);
  };
  if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' || text[16] != ':')
    return fail();
  int y = field(0, 4), mo = field(5, 2), da = field(8, 2);
  int hh = field(11, 2), mi = field(14, 2), ss = field(17, 2);
  std::size_t pos = 19;
  int frac_ms = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    std::size_t n = pos - start;
    if (n == 0 || n > 3) return fail();
    frac_ms = detail::to_int(text.substr(start, n));
    for (std::size_t i = n; i < 3; ++i) frac_ms *= 10;
  }
  std::int32_t offset = 0;
  std::string_view zone = text.substr(pos);
  if (zone == "Z") {
    offset = 0;
  } else if (zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') && zone[3] == ':') {
    if (!detail::all_digits(zone.substr(1, 2)) || !detail::all_digits(zone.substr(4, 2)))
      return fail();
    int oh = detail::to_int(zone.substr(1, 2));
    int om = detail::to_int(zone.substr(4, 2));
    if (om >= 60) return fail();
    offset = (zone[0] == '-' ? -1 : 1) * (oh * 60 + om);
    detail::check_offset(offset, text);
  } else {
    return fail();
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(da)}};
  if (!ymd.ok() || hh > 23 || mi > 59 || ss > 59) return fail();
  auto local = sys_days{ymd} + hours{hh} + minutes{mi} + seconds{ss} + milliseconds{frac_ms};
  std::int64_t local_ms = duration_cast<milliseconds>(local.time_since_epoch()).count();
  return WireDate{local_ms - std::int64_t{offset} * 60'000, offset};
}

// Accepts either rendering.
inline WireDate parse_wire_date(std::string_view text) {
  if (text.starts_with("/Date(")) return parse_legacy_date(text);
  return parse_iso8601_date(text);
}

}  // namespace blockaudit
