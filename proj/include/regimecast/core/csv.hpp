#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace regimecast::csv {

using Record = std::vector<std::string>;

/// RFC-4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF
/// or LF line endings, optional UTF-8 BOM. Blank lines are skipped.
std::vector<Record> parse(std::string_view text);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

std::string join(const Record& fields);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

}  // namespace regimecast::csv
