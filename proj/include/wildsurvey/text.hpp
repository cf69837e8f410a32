#pragma once

// CSV reading/writing (RFC 4180 quoting), ISO-8601 UTC timestamps, and
// strict numeric field parsing.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "wildsurvey/errors.hpp"

namespace wildsurvey {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

namespace text {

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// Splits a whole stream into records. Quoted fields may contain commas,
/// doubled quotes and newlines. A UTF-8 BOM and CRLF line ends are accepted.
/// Blank lines are skipped.
inline std::vector<CsvRow> read_csv(std::istream& in) {
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (data.rfind("\xEF\xBB\xBF", 0) == 0) pos = 3;

  std::vector<CsvRow> rows;
  std::size_t line = 1;
  while (pos < data.size()) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (; pos < data.size(); ++pos) {
      const char c = data[pos];
      if (quoted) {
        if (c == '"') {
          if (pos + 1 < data.size() && data[pos + 1] == '"') {
            field += '"';
            ++pos;
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
        }
        continue;
      }
      if (c == '"') {
        quoted = true;
        any = true;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        any = true;
      } else if (c == '\n' || c == '\r') {
        if (c == '\r' && pos + 1 < data.size() && data[pos + 1] == '\n') ++pos;
        ++pos;
        ++line;
        break;
      } else {
        field += c;
        any = true;
      }
    }
    if (!any && field.empty()) continue;
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(s);
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_double(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Accepts `YYYY-MM-DDTHH:MM:SS[.fff]Z`; fractional digits beyond
/// milliseconds are truncated.
inline std::optional<Timestamp> parse_timestamp(std::string_view raw) {
  const std::string s = trim(raw);
  if (s.size() < 20 || s.back() != 'Z') return std::nullopt;
  auto digits = [&](std::size_t at, std::size_t n) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = at; i < at + n; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  const auto y = digits(0, 4), mo = digits(5, 2), d = digits(8, 2);
  const auto h = digits(11, 2), mi = digits(14, 2), se = digits(17, 2);
  if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
  int millis = 0;
  const std::size_t tail = s.size() - 1;
  if (tail > 19) {
    if (s[19] != '.' || tail == 20) return std::nullopt;
    int scale = 100;
    for (std::size_t i = 20; i < tail; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      millis += (s[i] - '0') * scale;
      scale /= 10;
    }
  }
  using namespace std::chrono;
  const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)},
                           day{static_cast<unsigned>(*d)}};
  if (!ymd.ok() || *h > 23 || *mi > 59 || *se > 60) return std::nullopt;
  return time_point_cast<milliseconds>(sys_days{ymd}) + hours{*h} +
         minutes{*mi} + seconds{*se} + milliseconds{millis};
}

inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  auto rest = t - day_start;
  const auto h = duration_cast<hours>(rest);
  rest -= h;
  const auto m = duration_cast<minutes>(rest);
  rest -= m;
  const auto sec = duration_cast<seconds>(rest);
  rest -= sec;
  const auto ms = rest.count();
  char buf[40];
  if (ms == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ",
                  static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(h.count()),
                  static_cast<int>(m.count()), static_cast<int>(sec.count()));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                  static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(h.count()),
                  static_cast<int>(m.count()), static_cast<int>(sec.count()),
                  static_cast<int>(ms));
  }
  return buf;
}

inline double days_between(Timestamp a, Timestamp b) {
  return std::chrono::duration<double, std::ratio<86400>>(b - a).count();
}

}  // namespace text
}  // namespace wildsurvey
