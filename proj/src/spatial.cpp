#include "geosafety/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "geosafety/error.hpp"
#include "geosafety/parallel.hpp"

namespace geosafety {

namespace {

constexpr double kMetersPerDegree = kEarthRadiusM * std::numbers::pi / 180.0;
constexpr double kDegToRad = std::numbers::pi / 180.0;
// Slack so rounding never shrinks a cell below the query radius.
constexpr double kSlack = 1.0 + 1e-9;

}  // namespace

GridIndex::GridIndex(std::span<const GeoPoint> points, double max_radius)
    : max_radius_(max_radius) {
  if (!(max_radius > 0.0) || !std::isfinite(max_radius)) {
    throw Error(ErrorKind::InvalidArgument, "grid index max_radius must be positive");
  }
  cell_lat_ = max_radius / kMetersPerDegree * kSlack;

  double max_abs_lat = 0.0;
  for (const auto& p : points) max_abs_lat = std::max(max_abs_lat, std::abs(p.lat()));
  const double band = max_abs_lat + cell_lat_;
  if (band >= 89.0) {
    lon_cells_ = 1;
  } else {
    const double min_cell_lon = cell_lat_ / std::cos(band * kDegToRad);
    lon_cells_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(360.0 / min_cell_lon)));
  }
  cell_lon_ = 360.0 / static_cast<double>(lon_cells_);

  for (const auto& p : points) {
    cells_[key(lon_cell(p.lon()), lat_cell(p.lat()))].push_back(p);
  }
  size_ = points.size();
}

std::int64_t GridIndex::key(std::int64_t ix, std::int64_t iy) const noexcept {
  ix %= lon_cells_;
  if (ix < 0) ix += lon_cells_;
  return iy * lon_cells_ + ix;
}

std::int64_t GridIndex::lon_cell(double lon) const noexcept {
  return static_cast<std::int64_t>(std::floor((lon + 180.0) / cell_lon_));
}

std::int64_t GridIndex::lat_cell(double lat) const noexcept {
  return static_cast<std::int64_t>(std::floor((lat + 90.0) / cell_lat_));
}

std::size_t GridIndex::count_within(const GeoPoint& center, double radius) const {
  if (radius > max_radius_) {
    std::ostringstream msg;
    msg << "query radius " << radius << " m exceeds index radius " << max_radius_ << " m";
    throw Error(ErrorKind::RadiusExceedsIndex, msg.str());
  }
  if (cells_.empty() || radius < 0.0) return 0;

  const double dlat = radius / kMetersPerDegree * kSlack;
  const double lat_lo = std::max(-90.0, center.lat() - dlat);
  const double lat_hi = std::min(90.0, center.lat() + dlat);
  const double edge = std::max(std::abs(lat_lo), std::abs(lat_hi));

  std::int64_t ix_lo = 0;
  std::int64_t ix_hi = lon_cells_ - 1;
  if (edge < 89.999) {
    const double dlon = dlat / std::cos(edge * kDegToRad);
    if (2.0 * dlon < 360.0) {
      const std::int64_t lo = lon_cell(center.lon() - dlon);
      const std::int64_t hi = lon_cell(center.lon() + dlon);
      if (hi - lo + 1 < lon_cells_) {
        ix_lo = lo;
        ix_hi = hi;
      }
    }
  }

  std::size_t count = 0;
  for (std::int64_t iy = lat_cell(lat_lo); iy <= lat_cell(lat_hi); ++iy) {
    for (std::int64_t ix = ix_lo; ix <= ix_hi; ++ix) {
      auto it = cells_.find(key(ix, iy));
      if (it == cells_.end()) continue;
      for (const auto& p : it->second) {
        if (haversine_distance(center, p) <= radius) ++count;
      }
    }
  }
  return count;
}

int river_within(std::span<const Polyline> rivers, const GeoPoint& center, double threshold) {
  for (const auto& river : rivers) {
    if (point_polyline_distance(center, river, threshold) <= threshold) return 1;
  }
  return 0;
}

void FeatureRadii::validate() const {
  for (double r : {lights, bars, bus_stops, water_sources, religious, river}) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw Error(ErrorKind::ConfigError, "feature radii must be positive and finite");
    }
  }
}

std::array<double, 6> feature_values(const LocationFeatures& f) {
  return {static_cast<double>(f.lights_150m),        static_cast<double>(f.bars_400m),
          static_cast<double>(f.bus_stops_400m),     static_cast<double>(f.water_sources_400m),
          static_cast<double>(f.religious_400m),     static_cast<double>(f.river_within_50m)};
}

namespace {

FeatureRadii checked(FeatureRadii r) {
  r.validate();
  return r;
}

}  // namespace

FeatureExtractor::FeatureExtractor(const FeatureEntities& entities, FeatureRadii radii)
    : radii_(checked(radii)),
      lights_(entities.of(Category::StreetLight), radii_.lights),
      bars_(entities.of(Category::Bar), radii_.bars),
      bus_stops_(entities.of(Category::BusStop), radii_.bus_stops),
      water_(entities.of(Category::WaterSource), radii_.water_sources),
      religious_(entities.of(Category::ReligiousBuilding), radii_.religious),
      rivers_(entities.rivers) {}

LocationFeatures FeatureExtractor::extract(const GeoPoint& location) const {
  LocationFeatures f;
  f.lights_150m = static_cast<int>(lights_.count_within(location, radii_.lights));
  f.bars_400m = static_cast<int>(bars_.count_within(location, radii_.bars));
  f.bus_stops_400m = static_cast<int>(bus_stops_.count_within(location, radii_.bus_stops));
  f.water_sources_400m = static_cast<int>(water_.count_within(location, radii_.water_sources));
  f.religious_400m = static_cast<int>(religious_.count_within(location, radii_.religious));
  f.river_within_50m = river_within(rivers_, location, radii_.river);
  return f;
}

std::vector<LocationFeatures> FeatureExtractor::extract_all(std::span<const GeoPoint> locations,
                                                            unsigned threads) const {
  std::vector<LocationFeatures> out(locations.size());
  parallel_for(locations.size(), threads, [&](std::size_t i) { out[i] = extract(locations[i]); });
  return out;
}

LocationFeatures extract_features(const FeatureEntities& entities, const GeoPoint& location,
                                  const FeatureRadii& radii) {
  return FeatureExtractor(entities, radii).extract(location);
}

}  // namespace geosafety
