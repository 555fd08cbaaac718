#include "corrgraph/time.hpp"

#include <cctype>
#include <cstdio>

#include "corrgraph/errors.hpp"

namespace corrgraph {

namespace {

int read_digits(std::string_view text, std::size_t& pos, std::size_t count) {
    if (pos + count > text.size()) {
        throw ParseError("truncated timestamp: '" + std::string(text) + "'");
    }
    int value = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const char c = text[pos + i];
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw ParseError("expected digit in timestamp: '" + std::string(text) + "'");
        }
        value = value * 10 + (c - '0');
    }
    pos += count;
    return value;
}

void expect(std::string_view text, std::size_t& pos, char want) {
    if (pos >= text.size() || text[pos] != want) {
        throw ParseError("malformed timestamp: '" + std::string(text) + "'");
    }
    ++pos;
}

}  // namespace

Timestamp parse_rfc3339(std::string_view text) {
    using namespace std::chrono;
    std::size_t pos = 0;
    const int y = read_digits(text, pos, 4);
    expect(text, pos, '-');
    const int mo = read_digits(text, pos, 2);
    expect(text, pos, '-');
    const int d = read_digits(text, pos, 2);
    if (pos >= text.size() || (text[pos] != 'T' && text[pos] != 't' && text[pos] != ' ')) {
        throw ParseError("malformed timestamp: '" + std::string(text) + "'");
    }
    ++pos;
    const int h = read_digits(text, pos, 2);
    expect(text, pos, ':');
    const int mi = read_digits(text, pos, 2);
    expect(text, pos, ':');
    const int s = read_digits(text, pos, 2);
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        const std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            ++pos;
        }
        if (pos == start) {
            throw ParseError("empty fraction in timestamp: '" + std::string(text) + "'");
        }
    }
    int offset_seconds = 0;
    if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
        ++pos;
    } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        const int sign = text[pos] == '-' ? -1 : 1;
        ++pos;
        const int oh = read_digits(text, pos, 2);
        expect(text, pos, ':');
        const int om = read_digits(text, pos, 2);
        if (oh > 23 || om > 59) {
            throw ParseError("bad offset in timestamp: '" + std::string(text) + "'");
        }
        offset_seconds = sign * (oh * 3600 + om * 60);
    } else {
        throw ParseError("timestamp lacks a zone designator: '" + std::string(text) + "'");
    }
    if (pos != text.size()) {
        throw ParseError("trailing characters in timestamp: '" + std::string(text) + "'");
    }

    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
        throw ParseError("out-of-range field in timestamp: '" + std::string(text) + "'");
    }
    const sys_days days{ymd};
    return Timestamp{days} + hours{h} + minutes{mi} + seconds{s} - seconds{offset_seconds};
}

std::string format_rfc3339(Timestamp ts) {
    using namespace std::chrono;
    const auto days = floor<std::chrono::days>(ts);
    const year_month_day ymd{days};
    const hh_mm_ss<seconds> tod{ts - days};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()));
    return buf;
}

Seconds parse_duration(std::string_view text) {
    if (text.empty()) {
        throw ParseError("empty duration");
    }
    long long total = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t start = pos;
        long long value = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            value = value * 10 + (text[pos] - '0');
            if (value > 1'000'000'000LL) {
                throw ParseError("duration too large: '" + std::string(text) + "'");
            }
            ++pos;
        }
        if (pos == start || pos == text.size()) {
            throw ParseError("malformed duration: '" + std::string(text) + "'");
        }
        switch (text[pos]) {
        case 's': total += value; break;
        case 'm': total += value * 60; break;
        case 'h': total += value * 3600; break;
        case 'd': total += value * 86400; break;
        default: throw ParseError("unknown duration unit in '" + std::string(text) + "'");
        }
        ++pos;
    }
    return Seconds{total};
}

std::string format_duration(Seconds d) {
    long long s = d.count();
    if (s == 0) {
        return "0s";
    }
    std::string out;
    if (s < 0) {
        out = "-";
        s = -s;
    }
    const long long h = s / 3600;
    const long long m = (s % 3600) / 60;
    const long long sec = s % 60;
    if (h) out += std::to_string(h) + "h";
    if (m) out += std::to_string(m) + "m";
    if (sec) out += std::to_string(sec) + "s";
    return out;
}

}  // namespace corrgraph
