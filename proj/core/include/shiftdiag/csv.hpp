#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace shiftdiag {

// A raw RFC-4180 table: header plus string cells, row order preserved.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  int column_index(std::string_view name) const;
};

// Throws ValidationError with the offending line on malformed input
// (unterminated quote, ragged row, empty header).
CsvTable parse_csv(std::string_view text);
CsvTable read_csv_file(const std::string& path);

// Writes a table-like block of values. Quotes fields only when needed.
std::string csv_escape(std::string_view field);

}  // namespace shiftdiag
