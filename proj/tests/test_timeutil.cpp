#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nextpoi/timeutil.hpp"

using namespace nextpoi::timeutil;

TEST_CASE("civil round trips") {
    CHECK(days_from_civil(1970, 1, 1) == 0);
    CHECK(days_from_civil(2012, 4, 11) == 15441);

    const auto ct = civil_from_epoch(15441LL * 86400 + 13 * 3600 + 22 * 60);
    CHECK(ct.year == 2012);
    CHECK(ct.month == 4);
    CHECK(ct.day == 11);
    CHECK(ct.hour == 13);
    CHECK(ct.minute == 22);
    CHECK(ct.weekday == 3);  // Wednesday

    CHECK(weekday_from_epoch(0) == 4);  // 1970-01-01 was a Thursday
    CHECK(weekday_from_epoch(-1) == 3); // day before, no negative-mod surprise
}

TEST_CASE("iso8601 parsing") {
    CHECK(parse_iso8601("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_iso8601("2012-04-11T13:22:00Z") == 15441LL * 86400 + 13 * 3600 + 22 * 60);
    CHECK(parse_iso8601("2012-04-11 13:22:00") == 15441LL * 86400 + 13 * 3600 + 22 * 60);
    // +09:00 means the wall clock is ahead of UTC
    CHECK(parse_iso8601("2012-04-11T09:00:00+09:00") == 15441LL * 86400);
    CHECK(parse_iso8601("2012-04-11T09:00:00+0900") == 15441LL * 86400);
    CHECK(parse_iso8601("2012-04-10T21:30:00-02:30") == 15441LL * 86400);
    CHECK(parse_iso8601("2012-04-11T13:22:00.500Z") == 15441LL * 86400 + 13 * 3600 + 22 * 60);

    CHECK_FALSE(parse_iso8601("not a date").has_value());
    CHECK_FALSE(parse_iso8601("2012-02-30T00:00:00Z").has_value());
    CHECK_FALSE(parse_iso8601("2012-13-01T00:00:00Z").has_value());
    CHECK_FALSE(parse_iso8601("2012-04-11T25:00:00Z").has_value());
    CHECK_FALSE(parse_iso8601("2012-04-11T13:22:00Zjunk").has_value());
}

TEST_CASE("timestamp accepts epoch seconds or iso") {
    CHECK(parse_timestamp("1334150520") == 1334150520);
    CHECK(parse_timestamp("-86400") == -86400);
    CHECK(parse_timestamp("2012-04-11T13:22:00Z") == 1334150520);
    CHECK_FALSE(parse_timestamp("").has_value());
    CHECK_FALSE(parse_timestamp("12ab").has_value());
}

TEST_CASE("format round trip") {
    CHECK(format_iso8601(1334150520) == "2012-04-11T13:22:00Z");
    const int64_t t = 987654321;
    CHECK(parse_iso8601(format_iso8601(t)) == t);
}
