#pragma once

// Small strict-parsing helpers shared by the CSV interfaces: comma-separated
// tables without quoting, shortest round-trip double formatting, and UTC
// timestamps in the fixed form YYYY-MM-DDTHH:MM:SSZ.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "flexreg/errors.hpp"

namespace flexreg::io {

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw ContractViolation("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ValidationError(what + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view s, const std::string& what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ValidationError(what + ": not an integer: '" + std::string(s) + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Civil/UTC time. Epoch seconds <-> proleptic Gregorian calendar.
// ---------------------------------------------------------------------------

struct CivilTime {
  int year = 1970;
  int month = 1;  // 1-12
  int day = 1;    // 1-31
  int hour = 0;
  int minute = 0;
  int second = 0;
};

constexpr std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yr + (m <= 2));
}

constexpr int days_in_month(int year, int month) {
  constexpr int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2) {
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return leap ? 29 : 28;
  }
  return lengths[month - 1];
}

inline std::int64_t to_epoch_seconds(const CivilTime& c) {
  return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 + c.minute * 60 +
         c.second;
}

inline CivilTime from_epoch_seconds(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  CivilTime c;
  civil_from_days(days, c.year, c.month, c.day);
  c.hour = static_cast<int>(rem / 3600);
  c.minute = static_cast<int>((rem % 3600) / 60);
  c.second = static_cast<int>(rem % 60);
  return c;
}

/// Parses `YYYY-MM-DDTHH:MM:SSZ` (UTC, no other forms) into epoch seconds.
inline std::int64_t parse_timestamp_utc(std::string_view s, const std::string& what) {
  auto fail = [&]() -> std::int64_t {
    throw ValidationError(what + ": expected YYYY-MM-DDTHH:MM:SSZ, got '" + std::string(s) + "'");
  };
  if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
      s[16] != ':' || s[19] != 'Z') {
    return fail();
  }
  auto num = [&](int pos, int len) {
    int v = 0;
    for (int i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') fail();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  CivilTime c;
  c.year = num(0, 4);
  c.month = num(5, 2);
  c.day = num(8, 2);
  c.hour = num(11, 2);
  c.minute = num(14, 2);
  c.second = num(17, 2);
  if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > days_in_month(c.year, c.month) ||
      c.hour > 23 || c.minute > 59 || c.second > 59) {
    fail();
  }
  return to_epoch_seconds(c);
}

inline std::string format_timestamp_utc(std::int64_t t) {
  const CivilTime c = from_epoch_seconds(t);
  char buf[48];  // widest int renderings still fit
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year, c.month, c.day,
                c.hour, c.minute, c.second);
  return std::string(buf);
}

/// Civil time after shifting a UTC instant by a fixed offset (hours, may be
/// fractional). Stored timestamps stay UTC; grouping by local wall time uses
/// this shift only.
inline CivilTime civil_local(std::int64_t utc_epoch, double tz_offset_hours) {
  if (!std::isfinite(tz_offset_hours) || std::abs(tz_offset_hours) > 24.0) {
    throw ValidationError("tz_offset_hours must be finite and within [-24, 24]");
  }
  return from_epoch_seconds(utc_epoch + std::llround(tz_offset_hours * 3600.0));
}

inline int local_hour_of_day(std::int64_t utc_epoch, double tz_offset_hours) {
  return civil_local(utc_epoch, tz_offset_hours).hour;
}

// ---------------------------------------------------------------------------
// CSV. Comma separated, no quoting; fields must not contain commas or
// newlines. Blank lines are skipped. Line numbers are kept for error messages.
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row
  std::string source;             // file name or stream label, for errors

  /// Index of a required column; throws naming the column when absent.
  std::size_t require_column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw ValidationError(source + ": missing column '" + name + "'");
  }

  /// Index of an optional column, or npos when the header does not have it.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t find_column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    return npos;
  }
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  table.source = source;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      table.columns = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.columns.size()) {
      throw ValidationError(source + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.columns.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ValidationError(source + ": empty file (no header)");
  return table;
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  return read_csv(in, path.filename().string());
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  out << '\n';
}

}  // namespace flexreg::io
