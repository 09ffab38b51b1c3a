#pragma once

// Minimal RFC-4180-style CSV reader/writer: quoted fields, embedded commas
// and doubled quotes. Newlines inside quoted fields are not supported (no
// fixture or artifact needs them).

#include <string>
#include <vector>

namespace han::csv {

using Row = std::vector<std::string>;

// Splits one line into fields; throws han::ParseError on unbalanced quotes.
// `where` is used in error messages (e.g. "weights.csv line 12").
Row parse_line(const std::string& line, const std::string& where);

// Reads all rows of a CSV file, skipping blank lines. Throws han::Error if
// the file cannot be opened. Carriage returns are stripped.
std::vector<Row> read_file(const std::string& path);

// Quotes a field only when needed.
std::string escape(const std::string& field);

std::string join(const Row& row);

}  // namespace han::csv
