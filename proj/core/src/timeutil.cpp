#include "netcast/timeutil.hpp"

#include <cstdio>

#include "netcast/errors.hpp"

namespace netcast {

namespace {

// Euclidean floor division / modulo for possibly-negative timestamps.
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

}  // namespace

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  std::int64_t era = floor_div(y, 400);
  unsigned yoe = static_cast<unsigned>(y - era * 400);                       // [0, 399]
  unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                 static_cast<unsigned>(d) - 1;                               // [0, 365]
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;                      // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  std::int64_t era = floor_div(z, 146097);
  unsigned doe = static_cast<unsigned>(z - era * 146097);                    // [0, 146096]
  unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;      // [0, 399]
  std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
  unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);                    // [0, 365]
  unsigned mp = (5 * doy + 2) / 153;                                         // [0, 11]
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yr + (m <= 2));
}

std::int64_t parse_timestamp(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char sep = 0, tail = 0;
  int n = std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%c", &y, &mo, &d, &sep, &h, &mi,
                      &se, &tail);
  bool ok = (n == 7 || n == 8) && (sep == 'T' || sep == ' ') && (n == 7 || tail == 'Z');
  ok = ok && mo >= 1 && mo <= 12 && d >= 1 && d <= 31 && h >= 0 && h <= 23 && mi >= 0 &&
       mi <= 59 && se >= 0 && se <= 60;
  if (ok) {
    // Reject day numbers past the end of the month (e.g. Feb 30).
    static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int dmax = kDays[mo - 1] + (mo == 2 && is_leap(y) ? 1 : 0);
    ok = d <= dmax;
  }
  if (!ok) {
    fail(errc::unparseable_timestamp, "cannot parse '" + s + "' as an ISO-8601 timestamp");
  }
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

std::string format_timestamp(std::int64_t t) {
  int y, m, d;
  civil_from_days(floor_div(t, 86400), y, m, d);
  std::int64_t sod = floor_mod(t, 86400);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02lld:%02lld:%02lldZ", y, m, d,
                static_cast<long long>(sod / 3600), static_cast<long long>(sod / 60 % 60),
                static_cast<long long>(sod % 60));
  return buf;
}

int month_of(std::int64_t t) {
  int y, m, d;
  civil_from_days(floor_div(t, 86400), y, m, d);
  return m;
}

int hour_of(std::int64_t t) { return static_cast<int>(floor_mod(t, 86400) / 3600); }

int minute_of(std::int64_t t) { return static_cast<int>(floor_mod(t, 3600) / 60); }

int day_of_year(std::int64_t t) {
  int y, m, d;
  civil_from_days(floor_div(t, 86400), y, m, d);
  return static_cast<int>(floor_div(t, 86400) - days_from_civil(y, 1, 1)) + 1;
}

int weekday_of(std::int64_t t) {
  // 1970-01-01 was a Thursday; shift so Monday = 0.
  return static_cast<int>(floor_mod(floor_div(t, 86400) + 3, 7));
}

double hour_fraction(std::int64_t t) {
  return static_cast<double>(floor_mod(t, 86400)) / 3600.0;
}

}  // namespace netcast
