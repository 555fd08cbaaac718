#include <doctest.h>

#include "corrgraph/errors.hpp"
#include "corrgraph/time.hpp"

using namespace corrgraph;

TEST_CASE("rfc3339 parses utc, offsets and fractions") {
    const auto t = parse_rfc3339("2024-05-01T12:00:00Z");
    CHECK(format_rfc3339(t) == "2024-05-01T12:00:00Z");
    CHECK(parse_rfc3339("2024-05-01T14:00:00+02:00") == t);
    CHECK(parse_rfc3339("2024-05-01T07:30:00-04:30") == t);
    CHECK(parse_rfc3339("2024-05-01T12:00:00.999Z") == t);
    CHECK(parse_rfc3339("2024-05-01t12:00:00z") == t);
}

TEST_CASE("rfc3339 rejects malformed text") {
    for (const char* bad : {"", "2024-05-01", "2024-13-01T00:00:00Z", "2024-02-30T00:00:00Z", "2024-05-01T25:00:00Z",
                            "2024-05-01T12:00:00", "2024-05-01T12:00:00+0200", "yesterday"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_rfc3339(bad), ParseError);
    }
}

TEST_CASE("leap day round trip") {
    CHECK(format_rfc3339(parse_rfc3339("2024-02-29T23:59:59Z")) == "2024-02-29T23:59:59Z");
}

TEST_CASE("durations") {
    CHECK(parse_duration("35m") == std::chrono::minutes(35));
    CHECK(parse_duration("72h") == std::chrono::hours(72));
    CHECK(parse_duration("7d") == std::chrono::hours(168));
    CHECK(parse_duration("1h30m") == std::chrono::minutes(90));
    CHECK(parse_duration("90s") == Seconds(90));
    CHECK(format_duration(std::chrono::minutes(90)) == "1h30m");
    CHECK(format_duration(std::chrono::hours(48)) == "48h");
    CHECK(format_duration(Seconds(0)) == "0s");
    CHECK_THROWS_AS(parse_duration(""), ParseError);
    CHECK_THROWS_AS(parse_duration("5"), ParseError);
    CHECK_THROWS_AS(parse_duration("5w"), ParseError);
    CHECK_THROWS_AS(parse_duration("-5m"), ParseError);
}

TEST_CASE("duration format is inverse of parse") {
    for (long long s : {1LL, 59LL, 60LL, 3599LL, 3600LL, 86399LL, 86400LL, 90061LL, 604800LL}) {
        CAPTURE(s);
        CHECK(parse_duration(format_duration(Seconds(s))) == Seconds(s));
    }
}
