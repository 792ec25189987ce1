#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "geosafety/geo.hpp"
#include "geosafety/osm.hpp"

namespace geosafety {

/// Uniform lat/lon grid over a point set. Cells are at least as large as
/// `max_radius` in both directions, so a query scans at most 3x3 cells.
class GridIndex {
 public:
  GridIndex(std::span<const GeoPoint> points, double max_radius);

  /// Points with haversine_distance(center, p) <= radius. Throws
  /// RadiusExceedsIndex when radius > max_radius().
  std::size_t count_within(const GeoPoint& center, double radius) const;

  double max_radius() const noexcept { return max_radius_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t cell_count() const noexcept { return cells_.size(); }
  double cell_lat_deg() const noexcept { return cell_lat_; }
  double cell_lon_deg() const noexcept { return cell_lon_; }

 private:
  std::int64_t key(std::int64_t ix, std::int64_t iy) const noexcept;
  std::int64_t lon_cell(double lon) const noexcept;
  std::int64_t lat_cell(double lat) const noexcept;

  double max_radius_;
  double cell_lat_ = 1.0;
  double cell_lon_ = 1.0;
  std::int64_t lon_cells_ = 1;
  std::size_t size_ = 0;
  std::unordered_map<std::int64_t, std::vector<GeoPoint>> cells_;
};

/// Free-function form of GridIndex::count_within.
inline std::size_t count_within(const GridIndex& index, const GeoPoint& center, double radius) {
  return index.count_within(center, radius);
}

/// 1 when any river passes within `threshold` meters of `center`.
int river_within(std::span<const Polyline> rivers, const GeoPoint& center,
                 double threshold = 50.0);

struct FeatureRadii {
  double lights = 150.0;
  double bars = 400.0;
  double bus_stops = 400.0;
  double water_sources = 400.0;
  double religious = 400.0;
  double river = 50.0;

  void validate() const;
  friend bool operator==(const FeatureRadii&, const FeatureRadii&) = default;
};

struct LocationFeatures {
  int lights_150m = 0;
  int bars_400m = 0;
  int bus_stops_400m = 0;
  int water_sources_400m = 0;
  int religious_400m = 0;
  int river_within_50m = 0;

  friend bool operator==(const LocationFeatures&, const LocationFeatures&) = default;
};

inline constexpr std::array<const char*, 6> kFeatureColumns = {
    "lights_150m", "bars_400m", "bus_stops_400m", "water_sources_400m", "religious_400m",
    "river_within_50m"};

/// Feature values in kFeatureColumns order.
std::array<double, 6> feature_values(const LocationFeatures& f);

/// Holds one grid index per point category so many locations can be
/// processed against the same entities. Immutable after construction.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureEntities& entities, FeatureRadii radii = {});

  LocationFeatures extract(const GeoPoint& location) const;

  /// Extracts every location, in parallel when threads > 1. Output order
  /// matches input order.
  std::vector<LocationFeatures> extract_all(std::span<const GeoPoint> locations,
                                            unsigned threads = 1) const;

 private:
  FeatureRadii radii_;
  GridIndex lights_;
  GridIndex bars_;
  GridIndex bus_stops_;
  GridIndex water_;
  GridIndex religious_;
  std::vector<Polyline> rivers_;
};

LocationFeatures extract_features(const FeatureEntities& entities, const GeoPoint& location,
                                  const FeatureRadii& radii = {});

}  // namespace geosafety
