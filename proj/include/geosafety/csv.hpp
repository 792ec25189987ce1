#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geosafety {

struct CsvRow {
  std::size_t line = 0;  // 1-based line number in the source
  std::vector<std::string> fields;
};

/// Comma-separated table with a header row. Lines starting with '#' and
/// blank lines are ignored; fields may be double-quoted with "" escapes.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  /// Throws SchemaError unless the header starts with exactly `expected`.
  void require_header_prefix(const std::vector<std::string>& expected) const;
  /// Throws SchemaError when any row's arity differs from the header.
  void require_uniform_arity() const;
  [[noreturn]] void fail(const CsvRow& row, const std::string& message) const;
};

CsvTable read_csv(std::istream& in, std::string source = "<stream>");
CsvTable read_csv_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Strict numeric parsers: the whole field must be consumed. Throw SchemaError
/// naming `what` on failure.
double parse_double_field(std::string_view text, std::string_view what);
long long parse_int_field(std::string_view text, std::string_view what);

std::string csv_escape(std::string_view field);

/// Writes `content` to `path` (binary, truncating). Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace geosafety
