#pragma once

#include <cstdint>
#include <string>

namespace netcast {

/// Native measurement cadence: 15-minute steps.
inline constexpr std::int64_t kStepSeconds = 900;

/// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(int y, int m, int d);
/// Inverse of days_from_civil.
void civil_from_days(std::int64_t z, int& y, int& m, int& d);

/// Parse "YYYY-MM-DDTHH:MM:SS" (T or space separator, optional trailing Z)
/// to Unix seconds. Throws errc::unparseable_timestamp on malformed input.
std::int64_t parse_timestamp(const std::string& s);
/// Format Unix seconds as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(std::int64_t t);

/// Calendar accessors for a Unix timestamp (UTC).
int month_of(std::int64_t t);         // 1..12
int hour_of(std::int64_t t);          // 0..23
int minute_of(std::int64_t t);        // 0..59
int day_of_year(std::int64_t t);      // 1..366
int weekday_of(std::int64_t t);       // 0 = Monday .. 6 = Sunday
double hour_fraction(std::int64_t t); // hour + minute/60 + second/3600

}  // namespace netcast
