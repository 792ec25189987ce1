#include "geosafety/xml_reader.hpp"

#include <cctype>

#include "geosafety/error.hpp"

namespace geosafety {

namespace {

constexpr std::size_t kChunk = 1 << 16;

bool is_name_start(int c) { return std::isalpha(c) || c == '_' || c == ':' || c >= 0x80; }
bool is_name_char(int c) {
  return is_name_start(c) || std::isdigit(c) || c == '-' || c == '.';
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

std::optional<std::string_view> XmlReader::Event::attribute(std::string_view key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return std::string_view(v);
  }
  return std::nullopt;
}

XmlReader::XmlReader(std::istream& in) : in_(in), buffer_(kChunk) {}

bool XmlReader::fill() {
  if (pos_ < end_) return true;
  if (!in_) return false;
  in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  end_ = static_cast<std::size_t>(in_.gcount());
  pos_ = 0;
  return end_ > 0;
}

int XmlReader::peek() {
  if (!fill()) return -1;
  return static_cast<unsigned char>(buffer_[pos_]);
}

int XmlReader::get() {
  if (!fill()) return -1;
  const int c = static_cast<unsigned char>(buffer_[pos_++]);
  if (c == '\n') ++line_;
  return c;
}

void XmlReader::fail(const std::string& what) const {
  throw Error(ErrorKind::MalformedXml, what + " (line " + std::to_string(line_) + ")");
}

void XmlReader::expect(char c) {
  const int got = get();
  if (got != c) {
    if (got < 0) fail(std::string("unexpected end of input, expected '") + c + "'");
    fail(std::string("expected '") + c + "', found '" + static_cast<char>(got) + "'");
  }
}

void XmlReader::skip_whitespace() {
  while (true) {
    const int c = peek();
    if (c < 0 || !std::isspace(c)) return;
    get();
  }
}

void XmlReader::skip_until(std::string_view terminator) {
  std::size_t matched = 0;
  while (matched < terminator.size()) {
    const int c = get();
    if (c < 0) fail("unterminated markup, expected '" + std::string(terminator) + "'");
    if (c == terminator[matched]) {
      ++matched;
    } else {
      matched = (c == terminator[0]) ? 1 : 0;
    }
  }
}

std::string XmlReader::read_name() {
  std::string name;
  int c = peek();
  if (c < 0) fail("unexpected end of input in name");
  if (!is_name_start(c)) fail(std::string("invalid name character '") + static_cast<char>(c) + "'");
  while (c >= 0 && is_name_char(c)) {
    name.push_back(static_cast<char>(get()));
    c = peek();
  }
  return name;
}

void XmlReader::decode_entity(std::string& out) {
  std::string ref;
  while (true) {
    const int c = get();
    if (c < 0) fail("unexpected end of input in entity reference");
    if (c == ';') break;
    if (ref.size() > 10) fail("entity reference too long");
    ref.push_back(static_cast<char>(c));
  }
  if (ref == "amp") out.push_back('&');
  else if (ref == "lt") out.push_back('<');
  else if (ref == "gt") out.push_back('>');
  else if (ref == "quot") out.push_back('"');
  else if (ref == "apos") out.push_back('\'');
  else if (ref.size() > 1 && ref[0] == '#') {
    const bool hex = ref[1] == 'x' || ref[1] == 'X';
    const std::string digits = ref.substr(hex ? 2 : 1);
    if (digits.empty()) fail("empty character reference");
    std::uint32_t cp = 0;
    for (char d : digits) {
      const int v = std::isdigit(static_cast<unsigned char>(d)) ? d - '0'
                    : hex && std::isxdigit(static_cast<unsigned char>(d))
                        ? (std::tolower(static_cast<unsigned char>(d)) - 'a' + 10)
                        : -1;
      if (v < 0) fail("bad character reference &" + ref + ";");
      cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
      if (cp > 0x10FFFF) fail("character reference out of range");
    }
    append_utf8(out, cp);
  } else {
    fail("unknown entity &" + ref + ";");
  }
}

std::string XmlReader::read_attribute_value() {
  const int quote = get();
  if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
  std::string value;
  while (true) {
    const int c = get();
    if (c < 0) fail("unexpected end of input in attribute value");
    if (c == quote) break;
    if (c == '<') fail("'<' inside attribute value");
    if (c == '&') {
      decode_entity(value);
    } else {
      value.push_back(static_cast<char>(c));
    }
  }
  return value;
}

void XmlReader::parse_markup() {
  // Called just after '<'.
  const int c = peek();
  if (c == '/') {
    get();
    std::string name = read_name();
    skip_whitespace();
    expect('>');
    if (open_.empty() || open_.back() != name) {
      fail("mismatched end tag </" + name + ">");
    }
    open_.pop_back();
    event_.type = EventType::EndElement;
    event_.name = std::move(name);
    event_.attributes.clear();
    return;
  }

  std::string name = read_name();
  if (seen_root_ && open_.empty()) fail("content after document element");
  event_.type = EventType::StartElement;
  event_.attributes.clear();
  while (true) {
    const bool had_space = std::isspace(peek()) != 0;
    skip_whitespace();
    const int n = peek();
    if (n < 0) fail("unexpected end of input in tag <" + name + ">");
    if (n == '>') {
      get();
      break;
    }
    if (n == '/') {
      get();
      expect('>');
      pending_end_ = true;
      break;
    }
    if (!had_space) fail("missing whitespace between attributes in <" + name + ">");
    std::string key = read_name();
    for (const auto& attr : event_.attributes) {
      if (attr.first == key) fail("duplicate attribute '" + key + "' in <" + name + ">");
    }
    skip_whitespace();
    expect('=');
    skip_whitespace();
    event_.attributes.emplace_back(std::move(key), read_attribute_value());
  }
  seen_root_ = true;
  open_.push_back(name);
  event_.name = std::move(name);
}

const XmlReader::Event& XmlReader::next() {
  if (pending_end_) {
    pending_end_ = false;
    open_.pop_back();
    event_.type = EventType::EndElement;
    event_.attributes.clear();
    return event_;
  }
  while (true) {
    const int c = get();
    if (c < 0) {
      if (!open_.empty()) fail("unexpected end of input inside <" + open_.back() + ">");
      if (!seen_root_) fail("document has no root element");
      event_.type = EventType::EndOfDocument;
      event_.name.clear();
      event_.attributes.clear();
      return event_;
    }
    if (c != '<') {
      if (open_.empty() && !std::isspace(c) && !(c == 0xEF || c == 0xBB || c == 0xBF)) {
        fail("text outside document element");
      }
      continue;
    }
    const int n = peek();
    if (n == '?') {
      skip_until("?>");
      continue;
    }
    if (n == '!') {
      get();
      if (peek() == '-') {
        get();
        expect('-');
        skip_until("-->");
      } else if (peek() == '[') {
        skip_until("]]>");
      } else {
        skip_until(">");
      }
      continue;
    }
    parse_markup();
    return event_;
  }
}

}  // namespace geosafety
