#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace corrgraph {

using Seconds = std::chrono::seconds;
using Timestamp = std::chrono::sys_seconds;

/// Parses RFC 3339 ("2024-05-01T12:00:00Z", optional fraction and numeric
/// offset). Fractional seconds are truncated. Throws ParseError.
Timestamp parse_rfc3339(std::string_view text);

/// Formats as UTC with a trailing 'Z', seconds precision.
std::string format_rfc3339(Timestamp ts);

/// Parses durations such as "35m", "72h", "7d", "90s" or "1h30m".
Seconds parse_duration(std::string_view text);

/// Inverse of parse_duration using the largest exact units ("1h30m").
std::string format_duration(Seconds d);

}  // namespace corrgraph
