#pragma once

#include <cstdint>
#include <string>

namespace han {

// Parses a strict "YYYY-MM-DDThh:mm:ssZ" UTC timestamp into seconds since
// the Unix epoch. Throws han::ParseError on any deviation from the format or
// an out-of-range calendar component. Proleptic Gregorian; works for years
// far outside the 1970..2038 window (de-identified clinical records often
// live in the 22nd century).
std::int64_t parse_utc(const std::string& s);

// Inverse of parse_utc; always emits the strict 20-character form.
std::string format_utc(std::int64_t epoch_seconds);

}  // namespace han
