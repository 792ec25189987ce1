#include "geosafety/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>

#include "geosafety/error.hpp"

namespace geosafety {

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string> split_line(std::string_view line, const std::string& source,
                                    std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      if (was_quoted) {
        throw Error(ErrorKind::SchemaError, source + " line " + std::to_string(line_no) +
                                                ": text after closing quote");
      }
      cur.push_back(c);
    }
  }
  if (quoted) {
    throw Error(ErrorKind::SchemaError,
                source + " line " + std::to_string(line_no) + ": unterminated quoted field");
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

void CsvTable::require_header_prefix(const std::vector<std::string>& expected) const {
  bool ok = header.size() >= expected.size();
  for (std::size_t i = 0; ok && i < expected.size(); ++i) ok = header[i] == expected[i];
  if (!ok) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw Error(ErrorKind::SchemaError, source + ": header must start with '" + want + "'");
  }
}

void CsvTable::require_uniform_arity() const {
  for (const auto& row : rows) {
    if (row.fields.size() != header.size()) {
      fail(row, "expected " + std::to_string(header.size()) + " fields, found " +
                    std::to_string(row.fields.size()));
    }
  }
}

void CsvTable::fail(const CsvRow& row, const std::string& message) const {
  throw Error(ErrorKind::SchemaError, source + " line " + std::to_string(row.line) + ": " + message);
}

CsvTable read_csv(std::istream& in, std::string source) {
  CsvTable table;
  table.source = std::move(source);
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = strip_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_line(line, table.source, line_no);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      table.rows.push_back({line_no, std::move(fields)});
    }
  }
  if (!have_header) throw Error(ErrorKind::SchemaError, table.source + ": missing header row");
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return read_csv(in, path.string());
}

std::string format_double(double v) {
  if (v == 0.0) return "0";  // also folds -0
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

double parse_double_field(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() ||
      !std::isfinite(value)) {
    throw Error(ErrorKind::SchemaError,
                "invalid number '" + std::string(text) + "' for " + std::string(what));
  }
  return value;
}

long long parse_int_field(std::string_view text, std::string_view what) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::SchemaError,
                "invalid integer '" + std::string(text) + "' for " + std::string(what));
  }
  return value;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos && !field.starts_with('#')) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

}  // namespace geosafety
