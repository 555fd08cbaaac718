#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace corrgraph::csv {

/// Reads one RFC 4180 record (quoted fields may span lines). Returns nullopt
/// at end of input.
std::optional<std::vector<std::string>> read_record(std::istream& in);

/// Quotes a field only when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace corrgraph::csv
