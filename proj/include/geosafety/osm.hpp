#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geosafety/geo.hpp"

namespace geosafety {

using OsmId = std::int64_t;
using TagMap = std::map<std::string, std::string, std::less<>>;

struct OsmNode {
  OsmId id = 0;
  GeoPoint point;
  TagMap tags;
};

struct OsmWay {
  OsmId id = 0;
  std::vector<OsmId> node_refs;
  TagMap tags;
  bool incomplete = false;  // some node_refs do not resolve within the snapshot
};

/// Parsed nodes and ways of one OSM XML document. Relations are dropped.
class OsmSnapshot {
 public:
  const std::vector<OsmNode>& nodes() const noexcept { return nodes_; }
  const std::vector<OsmWay>& ways() const noexcept { return ways_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  const OsmNode* find_node(OsmId id) const;

  void add_node(OsmNode node);
  void add_way(OsmWay way);
  /// Flags ways with unresolved refs and records a warning for each.
  void resolve_references();

 private:
  std::vector<OsmNode> nodes_;
  std::vector<OsmWay> ways_;
  std::unordered_map<OsmId, std::size_t> node_index_;
  std::vector<std::string> warnings_;
};

OsmSnapshot parse_osm(std::istream& in);
OsmSnapshot parse_osm_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Classification

enum class Category { Bar, ReligiousBuilding, BusStop, WaterSource, StreetLight, River };

inline constexpr std::array kPointCategories = {Category::Bar, Category::ReligiousBuilding,
                                                Category::BusStop, Category::WaterSource,
                                                Category::StreetLight};
inline constexpr std::array kAllCategories = {Category::Bar,         Category::ReligiousBuilding,
                                              Category::BusStop,     Category::WaterSource,
                                              Category::StreetLight, Category::River};

/// Section name used in tag-mapping files ("bar", "religious_building", ...).
std::string_view category_key(Category c);

struct TagPattern {
  std::string key;
  std::string value;
  friend bool operator==(const TagPattern&, const TagPattern&) = default;
};

/// Per-category key=value patterns plus the river name filter.
class TagMapping {
 public:
  /// Standard OSM tagging for the six feature categories.
  static TagMapping defaults();

  /// Parses the INI-style grammar documented in README.md. Throws ConfigError.
  static TagMapping parse(std::string_view text);
  static TagMapping load(const std::filesystem::path& path);

  /// Canonical text form; parse(to_text()) reproduces the mapping exactly.
  std::string to_text() const;

  const std::vector<TagPattern>& patterns(Category c) const {
    return patterns_[static_cast<std::size_t>(c)];
  }
  const std::vector<std::string>& river_names() const noexcept { return river_names_; }

  void set_patterns(Category c, std::vector<TagPattern> patterns);
  void set_river_names(std::vector<std::string> names);

  /// Throws ConfigError unless every category has a pattern and the river
  /// name list is non-empty with non-empty entries.
  void validate() const;

  bool matches(Category c, const TagMap& tags) const;
  bool river_name_matches(const TagMap& tags) const;

  friend bool operator==(const TagMapping&, const TagMapping&) = default;

 private:
  std::array<std::vector<TagPattern>, kAllCategories.size()> patterns_;
  std::vector<std::string> river_names_;
};

struct FeatureEntities {
  std::array<std::vector<GeoPoint>, kPointCategories.size()> points;
  std::vector<Polyline> rivers;

  std::vector<GeoPoint>& of(Category c) { return points.at(static_cast<std::size_t>(c)); }
  const std::vector<GeoPoint>& of(Category c) const {
    return points.at(static_cast<std::size_t>(c));
  }
};

struct ClassifyIssue {
  OsmId way_id = 0;
  std::string message;  // "UnresolvableRiverWay: ..."
};

struct ClassifyResult {
  FeatureEntities entities;
  std::vector<ClassifyIssue> issues;
};

ClassifyResult classify_entities(const OsmSnapshot& snapshot, const TagMapping& mapping);

/// Writes entities as an OSM v0.6 document, tagging each point with the first
/// pattern of its category and each river with the first river name.
void write_osm(std::ostream& out, const FeatureEntities& entities, const TagMapping& mapping);

}  // namespace geosafety
