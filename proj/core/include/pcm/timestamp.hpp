#pragma once

#include <cstdint>
#include <string>

namespace pcm {

// Instants are UTC unix seconds. Input offsets are normalized away at parse
// time; formatting always emits UTC.

struct CivilTime {
  int year = 1970;
  int month = 1;   // 1..12
  int day = 1;     // 1..31
  int hour = 0;    // 0..23
  int minute = 0;  // 0..59
  int second = 0;  // 0..60 (leap seconds accepted on input, never produced)
};

// days since 1970-01-01 (proleptic Gregorian)
std::int64_t days_from_civil(int year, int month, int day);
CivilTime civil_from_unix(std::int64_t unix_seconds);
std::int64_t unix_from_civil(const CivilTime& c, std::int64_t utc_offset_seconds);

// 0 = Monday .. 6 = Sunday
int weekday_monday0(std::int64_t unix_seconds);

// Format tokens: %Y %m %d %H %M %S %z plus literal characters ('%%' escapes).
// %S consumes an optional fractional part on input and truncates it.
// %z accepts Z, +HH, +HHMM, +HH:MM (and the - forms); it formats as +0000.
std::int64_t parse_timestamp(const std::string& text, const std::string& format);
std::string format_timestamp(std::int64_t unix_seconds, const std::string& format);

}  // namespace pcm
