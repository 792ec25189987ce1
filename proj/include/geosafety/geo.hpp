#pragma once

#include <span>
#include <vector>

namespace geosafety {

/// Mean Earth radius of the spherical model, in meters.
inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Largest origin-to-point distance accepted by local_project.
inline constexpr double kProjectionGuardM = 10'000.0;

/// WGS84 latitude/longitude in degrees. Validated on construction.
class GeoPoint {
 public:
  GeoPoint() = default;
  GeoPoint(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

/// Ordered vertex chain with at least two vertices.
class Polyline {
 public:
  explicit Polyline(std::vector<GeoPoint> vertices);

  std::span<const GeoPoint> vertices() const noexcept { return vertices_; }
  std::size_t size() const noexcept { return vertices_.size(); }

  friend bool operator==(const Polyline&, const Polyline&) = default;

 private:
  std::vector<GeoPoint> vertices_;
};

struct PlanarOffset {
  double x = 0.0;  // meters east
  double y = 0.0;  // meters north
};

double haversine_distance(const GeoPoint& a, const GeoPoint& b) noexcept;

/// Equirectangular tangent-plane projection about `origin`.
/// Throws ProjectionRange when `p` is more than 10 km from `origin`.
PlanarOffset local_project(const GeoPoint& origin, const GeoPoint& p);

/// Inverse of local_project.
GeoPoint local_unproject(const GeoPoint& origin, PlanarOffset offset);

/// Minimum distance from `p` to any segment of `line`, measured in the tangent
/// plane at `p` with the perpendicular foot clamped to the segment.
/// Every vertex must lie within 10 km of `p`.
double point_polyline_distance(const GeoPoint& p, const Polyline& line);

/// As above, but segments whose bounding box lies farther than `cull_radius`
/// from `p` are skipped, and long segments are split until each piece is
/// within projection range. Returns +inf when everything is culled.
double point_polyline_distance(const GeoPoint& p, const Polyline& line, double cull_radius);

}  // namespace geosafety
