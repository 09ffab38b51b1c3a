#include "han/csv.hpp"

#include <fstream>

#include "han/error.hpp"

namespace han::csv {

Row parse_line(const std::string& line, const std::string& where) {
  Row out;
  std::string field;
  bool quoted = false;
  bool closed = false;  // a quoted field ended; only ',' or EOL may follow
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          quoted = false;
          closed = true;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
    } else if (closed && c != ',') {
      throw ParseError("text after closing quote in " + where);
    } else if (c == '"' && field.empty()) {
      quoted = true;
      ++i;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
      closed = false;
      ++i;
    } else {
      field += c;
      ++i;
    }
  }
  if (quoted) throw ParseError("unterminated quote in " + where);
  out.push_back(std::move(field));
  return out;
}

std::vector<Row> read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV file: " + path);
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_line(line, path + " line " + std::to_string(lineno)));
  }
  return rows;
}

std::string escape(const std::string& field) {
  const bool needs_quotes =
      field.find_first_of(",\"\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string join(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += escape(row[i]);
  }
  return out;
}

}  // namespace han::csv
