#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

#include "geosafety/error.hpp"
#include "geosafety/osm.hpp"

namespace geosafety {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

constexpr std::string_view kNameContains = "name_contains";

}  // namespace

std::string_view category_key(Category c) {
  switch (c) {
    case Category::Bar: return "bar";
    case Category::ReligiousBuilding: return "religious_building";
    case Category::BusStop: return "bus_stop";
    case Category::WaterSource: return "water_source";
    case Category::StreetLight: return "street_light";
    case Category::River: return "river";
  }
  return "";
}

TagMapping TagMapping::defaults() {
  TagMapping m;
  m.set_patterns(Category::Bar, {{"amenity", "bar"}, {"amenity", "pub"}});
  m.set_patterns(Category::ReligiousBuilding, {{"amenity", "place_of_worship"}});
  m.set_patterns(Category::BusStop, {{"highway", "bus_stop"}, {"amenity", "bus_station"}});
  m.set_patterns(Category::WaterSource, {{"amenity", "drinking_water"},
                                         {"man_made", "water_point"},
                                         {"amenity", "water_point"}});
  m.set_patterns(Category::StreetLight, {{"highway", "street_lamp"}});
  m.set_patterns(Category::River, {{"waterway", "river"}});
  m.set_river_names({"Ngong", "Motoine"});
  return m;
}

void TagMapping::set_patterns(Category c, std::vector<TagPattern> patterns) {
  patterns_[static_cast<std::size_t>(c)] = std::move(patterns);
}

void TagMapping::set_river_names(std::vector<std::string> names) {
  river_names_ = std::move(names);
}

void TagMapping::validate() const {
  for (Category c : kAllCategories) {
    const auto& ps = patterns(c);
    if (ps.empty()) {
      throw Error(ErrorKind::ConfigError,
                  "category '" + std::string(category_key(c)) + "' has no tag patterns");
    }
    for (const auto& p : ps) {
      const std::string where = " in category '" + std::string(category_key(c)) + "'";
      if (p.key.empty()) throw Error(ErrorKind::ConfigError, "empty tag key" + where);
      if (p.key.find('=') != std::string::npos || p.key == kNameContains ||
          p.key.front() == '[' || p.key.front() == '#' || p.key.front() == ';' ||
          trim(p.key) != p.key || trim(p.value) != p.value ||
          p.value.find('\n') != std::string::npos) {
        throw Error(ErrorKind::ConfigError, "unrepresentable pattern '" + p.key + "=" + p.value +
                                                "'" + where);
      }
    }
  }
  if (river_names_.empty()) throw Error(ErrorKind::ConfigError, "river name filter is empty");
  for (const auto& n : river_names_) {
    if (n.empty() || trim(n) != n || n.find('\n') != std::string::npos) {
      throw Error(ErrorKind::ConfigError, "invalid river name substring '" + n + "'");
    }
  }
}

bool TagMapping::matches(Category c, const TagMap& tags) const {
  for (const auto& p : patterns(c)) {
    auto it = tags.find(p.key);
    if (it != tags.end() && it->second == p.value) return true;
  }
  return false;
}

bool TagMapping::river_name_matches(const TagMap& tags) const {
  auto it = tags.find("name");
  if (it == tags.end()) return false;
  const std::string name = lower(it->second);
  return std::any_of(river_names_.begin(), river_names_.end(), [&](const std::string& needle) {
    return name.find(lower(needle)) != std::string::npos;
  });
}

TagMapping TagMapping::parse(std::string_view text) {
  TagMapping m;
  std::array<bool, kAllCategories.size()> seen{};
  std::optional<Category> current;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  const auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::ConfigError, "tag mapping line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      current.reset();
      for (Category c : kAllCategories) {
        if (category_key(c) == name) current = c;
      }
      if (!current) fail("unknown category '" + std::string(name) + "'");
      const auto idx = static_cast<std::size_t>(*current);
      if (seen[idx]) fail("duplicate section [" + std::string(name) + "]");
      seen[idx] = true;
      continue;
    }
    if (!current) fail("entry outside of a section");
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (key == kNameContains) {
      if (*current != Category::River) fail("name_contains is only valid under [river]");
      m.river_names_.emplace_back(value);
    } else {
      m.patterns_[static_cast<std::size_t>(*current)].push_back(
          {std::string(key), std::string(value)});
    }
  }
  m.validate();
  return m;
}

TagMapping TagMapping::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open tag mapping " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string TagMapping::to_text() const {
  std::ostringstream out;
  bool first = true;
  for (Category c : kAllCategories) {
    if (!first) out << '\n';
    first = false;
    out << '[' << category_key(c) << "]\n";
    for (const auto& p : patterns(c)) out << p.key << '=' << p.value << '\n';
    if (c == Category::River) {
      for (const auto& n : river_names_) out << kNameContains << '=' << n << '\n';
    }
  }
  return out.str();
}

}  // namespace geosafety
