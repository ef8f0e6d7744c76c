#include <doctest.h>

#include <cmath>

#include "netcast/errors.hpp"
#include "netcast/mathfn.hpp"
#include "netcast/timeutil.hpp"

using namespace netcast;

TEST_CASE("softplus and sigmoid basics") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(softplus(50.0) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(softplus(-50.0) > 0.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(3.0) + sigmoid(-3.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sigmoid(-1000.0) >= 0.0);
  CHECK(sigmoid(1000.0) <= 1.0);
}

TEST_CASE("standard normal cdf/pdf reference points") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std_normal_cdf(1.96) == doctest::Approx(0.9750).epsilon(1e-4));
  CHECK(std_normal_cdf(-1.96) == doctest::Approx(0.0250).epsilon(1e-3));
  CHECK(std_normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("z-table is pinned to the published quantiles") {
  CHECK(z_for_level(50) == doctest::Approx(0.6744897501960817).epsilon(1e-15));
  CHECK(z_for_level(68) == doctest::Approx(0.9944578832097532).epsilon(1e-15));
  CHECK(z_for_level(95) == doctest::Approx(1.9599639845400545).epsilon(1e-15));
  CHECK(z_for_level(95, true) == 2.0);
  CHECK(z_for_level(99) == doctest::Approx(2.5758293035489004).epsilon(1e-15));
  CHECK_THROWS_AS(z_for_level(90), Error);
  try {
    z_for_level(42);
    FAIL("expected a bad-level error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::bad_level);
  }
}

TEST_CASE("timestamp parse/format round trip") {
  const char* text = "2021-03-07T14:45:00Z";
  std::int64_t t = parse_timestamp(text);
  CHECK(format_timestamp(t) == text);
  CHECK(parse_timestamp("2021-03-07 14:45:00") == t);
  CHECK(t % kStepSeconds == 0);
}

TEST_CASE("timestamp validation") {
  CHECK_THROWS_AS(parse_timestamp("not a time"), Error);
  CHECK_THROWS_AS(parse_timestamp("2021-13-01T00:00:00Z"), Error);
  CHECK_THROWS_AS(parse_timestamp("2021-02-29T00:00:00Z"), Error);  // not a leap year
  CHECK_NOTHROW(parse_timestamp("2020-02-29T00:00:00Z"));           // leap year
  CHECK_THROWS_AS(parse_timestamp("2021-01-01T24:00:00Z"), Error);
  try {
    parse_timestamp("garbage");
    FAIL("expected unparseable timestamp");
  } catch (const Error& e) {
    CHECK(e.code() == errc::unparseable_timestamp);
  }
}

TEST_CASE("civil date helpers") {
  // 1970-01-01 was a Thursday; weekday_of uses 0 = Monday.
  CHECK(weekday_of(0) == 3);
  std::int64_t sat = parse_timestamp("2021-01-02T00:00:00Z");
  CHECK(weekday_of(sat) == 5);
  CHECK(day_of_year(parse_timestamp("2021-01-01T00:00:00Z")) == 1);
  CHECK(day_of_year(parse_timestamp("2021-12-31T00:00:00Z")) == 365);
  CHECK(day_of_year(parse_timestamp("2020-12-31T00:00:00Z")) == 366);
  std::int64_t t = parse_timestamp("2021-06-15T18:30:00Z");
  CHECK(month_of(t) == 6);
  CHECK(hour_of(t) == 18);
  CHECK(minute_of(t) == 30);
  CHECK(hour_fraction(t) == doctest::Approx(18.5).epsilon(1e-12));
}
