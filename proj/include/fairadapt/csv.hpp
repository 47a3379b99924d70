#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fairadapt {

/// Records of an RFC 4180 style CSV document. Quoted fields may contain
/// commas, doubled quotes and line breaks. A trailing newline is optional and
/// CRLF line endings are accepted. Each field remembers whether it was quoted.
struct CsvField {
  std::string text;
  bool quoted = false;
};
using CsvRecord = std::vector<CsvField>;

std::vector<CsvRecord> parse_csv(std::string_view text);

/// Quotes a field only when it needs quoting.
std::string csv_escape(std::string_view field);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict full-string parse; rejects empty text, trailing garbage, inf and nan.
std::optional<double> parse_double(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace fairadapt
