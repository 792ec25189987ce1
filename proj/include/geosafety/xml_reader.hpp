#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace geosafety {

/// Minimal pull parser for the element/attribute subset of XML that OSM
/// exports use. Text content is skipped; comments, processing instructions,
/// CDATA and DOCTYPE are consumed. Throws MalformedXml on bad markup or when
/// the stream ends inside an element.
class XmlReader {
 public:
  enum class EventType { StartElement, EndElement, EndOfDocument };

  struct Event {
    EventType type = EventType::EndOfDocument;
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;

    std::optional<std::string_view> attribute(std::string_view key) const;
  };

  explicit XmlReader(std::istream& in);

  /// Next structural event. Self-closing tags yield a StartElement followed by
  /// an EndElement.
  const Event& next();

  std::size_t depth() const noexcept { return open_.size(); }
  std::uint64_t line() const noexcept { return line_; }

 private:
  int peek();
  int get();
  bool fill();
  [[noreturn]] void fail(const std::string& what) const;

  void expect(char c);
  void skip_whitespace();
  void skip_until(std::string_view terminator);
  std::string read_name();
  std::string read_attribute_value();
  void decode_entity(std::string& out);
  void parse_markup();

  std::istream& in_;
  std::vector<char> buffer_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  std::uint64_t line_ = 1;

  std::vector<std::string> open_;
  Event event_;
  bool pending_end_ = false;
  bool seen_root_ = false;
};

}  // namespace geosafety
