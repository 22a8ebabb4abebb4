#include "pcm/timestamp.hpp"

#include <cstdio>

#include "pcm/errors.hpp"

namespace pcm {

namespace {

// floor division/modulo for possibly-negative day counts
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return lengths[m - 1];
}

}  // namespace

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = floor_div(y, 400);
  const unsigned yoe = static_cast<unsigned>(y - era * 400);              // [0, 399]
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;   // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;             // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilTime civil_from_unix(std::int64_t unix_seconds) {
  std::int64_t z = floor_div(unix_seconds, 86400);
  std::int64_t sod = unix_seconds - z * 86400;  // [0, 86399]

  z += 719468;
  const std::int64_t era = floor_div(z, 146097);
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);

  CivilTime c;
  c.year = static_cast<int>(y + (m <= 2));
  c.month = static_cast<int>(m);
  c.day = static_cast<int>(d);
  c.hour = static_cast<int>(sod / 3600);
  c.minute = static_cast<int>((sod % 3600) / 60);
  c.second = static_cast<int>(sod % 60);
  return c;
}

std::int64_t unix_from_civil(const CivilTime& c, std::int64_t utc_offset_seconds) {
  return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 +
         c.minute * 60 + c.second - utc_offset_seconds;
}

int weekday_monday0(std::int64_t unix_seconds) {
  const std::int64_t days = floor_div(unix_seconds, 86400);
  // 1970-01-01 was a Thursday (index 3 when Monday = 0)
  std::int64_t w = (days + 3) % 7;
  if (w < 0) w += 7;
  return static_cast<int>(w);
}

namespace {

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  int read_digits(int count, const char* what) {
    int value = 0;
    for (int i = 0; i < count; ++i) {
      if (done() || text[pos] < '0' || text[pos] > '9') {
        throw ParseError(std::string("expected digit for ") + what +
                         " in timestamp '" + text + "'");
      }
      value = value * 10 + (text[pos] - '0');
      ++pos;
    }
    return value;
  }
};

// Z | +HH | +HHMM | +HH:MM (and - forms) -> offset seconds east of UTC
std::int64_t read_offset(Cursor& cur) {
  if (cur.done()) throw ParseError("missing UTC offset in timestamp '" + cur.text + "'");
  char c = cur.peek();
  if (c == 'Z' || c == 'z') {
    ++cur.pos;
    return 0;
  }
  int sign;
  if (c == '+') {
    sign = 1;
  } else if (c == '-') {
    sign = -1;
  } else {
    throw ParseError("bad UTC offset in timestamp '" + cur.text + "'");
  }
  ++cur.pos;
  int hours = cur.read_digits(2, "offset hours");
  int minutes = 0;
  if (!cur.done() && (cur.peek() == ':' || (cur.peek() >= '0' && cur.peek() <= '9'))) {
    if (cur.peek() == ':') ++cur.pos;
    minutes = cur.read_digits(2, "offset minutes");
  }
  if (hours > 18 || minutes > 59) {
    throw ParseError("UTC offset out of range in timestamp '" + cur.text + "'");
  }
  return sign * (hours * 3600LL + minutes * 60LL);
}

}  // namespace

std::int64_t parse_timestamp(const std::string& text, const std::string& format) {
  Cursor cur{text};
  CivilTime c;
  std::int64_t offset = 0;

  for (std::size_t f = 0; f < format.size(); ++f) {
    if (format[f] != '%') {
      if (cur.done() || cur.peek() != format[f]) {
        throw ParseError("timestamp '" + text + "' does not match format '" + format + "'");
      }
      ++cur.pos;
      continue;
    }
    if (++f >= format.size()) throw ConfigError("dangling '%' in timestamp format '" + format + "'");
    switch (format[f]) {
      case 'Y': c.year = cur.read_digits(4, "year"); break;
      case 'm': c.month = cur.read_digits(2, "month"); break;
      case 'd': c.day = cur.read_digits(2, "day"); break;
      case 'H': c.hour = cur.read_digits(2, "hour"); break;
      case 'M': c.minute = cur.read_digits(2, "minute"); break;
      case 'S':
        c.second = cur.read_digits(2, "second");
        // sub-second precision is accepted and truncated
        if (!cur.done() && cur.peek() == '.') {
          ++cur.pos;
          while (!cur.done() && cur.peek() >= '0' && cur.peek() <= '9') ++cur.pos;
        }
        break;
      case 'z': offset = read_offset(cur); break;
      case '%':
        if (cur.done() || cur.peek() != '%') {
          throw ParseError("timestamp '" + text + "' does not match format '" + format + "'");
        }
        ++cur.pos;
        break;
      default:
        throw ConfigError(std::string("unsupported timestamp format token '%") +
                          format[f] + "' in '" + format + "'");
    }
  }
  if (!cur.done()) {
    throw ParseError("trailing characters in timestamp '" + text + "'");
  }

  if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > days_in_month(c.year, c.month) ||
      c.hour > 23 || c.minute > 59 || c.second > 60) {
    throw ParseError("timestamp field out of range in '" + text + "'");
  }
  return unix_from_civil(c, offset);
}

std::string format_timestamp(std::int64_t unix_seconds, const std::string& format) {
  const CivilTime c = civil_from_unix(unix_seconds);
  std::string out;
  char buf[8];
  for (std::size_t f = 0; f < format.size(); ++f) {
    if (format[f] != '%') {
      out += format[f];
      continue;
    }
    if (++f >= format.size()) throw ConfigError("dangling '%' in timestamp format '" + format + "'");
    switch (format[f]) {
      case 'Y': std::snprintf(buf, sizeof(buf), "%04d", c.year); out += buf; break;
      case 'm': std::snprintf(buf, sizeof(buf), "%02d", c.month); out += buf; break;
      case 'd': std::snprintf(buf, sizeof(buf), "%02d", c.day); out += buf; break;
      case 'H': std::snprintf(buf, sizeof(buf), "%02d", c.hour); out += buf; break;
      case 'M': std::snprintf(buf, sizeof(buf), "%02d", c.minute); out += buf; break;
      case 'S': std::snprintf(buf, sizeof(buf), "%02d", c.second); out += buf; break;
      case 'z': out += "+0000"; break;
      case '%': out += '%'; break;
      default:
        throw ConfigError(std::string("unsupported timestamp format token '%") +
                          format[f] + "' in '" + format + "'");
    }
  }
  return out;
}

}  // namespace pcm
