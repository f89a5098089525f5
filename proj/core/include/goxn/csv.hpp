#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace goxn {

/// Shortest decimal that round-trips to the same double; no locale, no exponent
/// surprises beyond what std::to_chars produces.
std::string format_number(double value);
std::string format_number(std::uint64_t value);

/// Parses a full string as a double. Throws ParseError on trailing garbage.
double parse_number(std::string_view text);
std::uint64_t parse_unsigned(std::string_view text);

using CsvRow = std::vector<std::string>;

/// RFC 4180 field quoting; LF line endings.
void write_csv_row(std::ostream& out, const CsvRow& row);

/// Reads a whole CSV file. Throws IoError if unreadable, ParseError (with
/// file:line) on an unterminated quote.
std::vector<CsvRow> read_csv_file(const std::string& path);

/// Writes rows to `path` atomically enough for our purposes (write then rename).
void write_csv_file(const std::string& path, const std::vector<CsvRow>& rows);

}  // namespace goxn
