#include "geosafety/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "geosafety/error.hpp"

namespace geosafety {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double wrap_lon_delta(double dlon_deg) {
  if (dlon_deg > 180.0) return dlon_deg - 360.0;
  if (dlon_deg < -180.0) return dlon_deg + 360.0;
  return dlon_deg;
}

PlanarOffset project_unchecked(const GeoPoint& origin, const GeoPoint& p) {
  const double dlon = wrap_lon_delta(p.lon() - origin.lon()) * kDegToRad;
  const double dlat = (p.lat() - origin.lat()) * kDegToRad;
  return {kEarthRadiusM * dlon * std::cos(origin.lat() * kDegToRad), kEarthRadiusM * dlat};
}

// Distance from the plane origin to segment [a, b].
double origin_segment_distance(PlanarOffset a, PlanarOffset b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(-(a.x * dx + a.y * dy) / len2, 0.0, 1.0);
  }
  return std::hypot(a.x + t * dx, a.y + t * dy);
}

double bbox_distance(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double lat = std::clamp(p.lat(), std::min(a.lat(), b.lat()), std::max(a.lat(), b.lat()));
  const double lon = std::clamp(p.lon(), std::min(a.lon(), b.lon()), std::max(a.lon(), b.lon()));
  return haversine_distance(p, GeoPoint(lat, lon));
}

double culled_segment_distance(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b,
                               double cull_radius, int depth) {
  if (bbox_distance(p, a, b) > cull_radius * 1.01 + 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  const bool in_range = haversine_distance(p, a) <= kProjectionGuardM &&
                        haversine_distance(p, b) <= kProjectionGuardM;
  if (in_range || depth >= 48) {
    return origin_segment_distance(project_unchecked(p, a), project_unchecked(p, b));
  }
  // Midpoint in lat/lon space keeps the piece on the same straight line of the
  // equirectangular plane.
  const GeoPoint mid(0.5 * (a.lat() + b.lat()), 0.5 * (a.lon() + b.lon()));
  return std::min(culled_segment_distance(p, a, mid, cull_radius, depth + 1),
                  culled_segment_distance(p, mid, b, cull_radius, depth + 1));
}

}  // namespace

GeoPoint::GeoPoint(double lat, double lon) : lat_(lat), lon_(lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0 || lon < -180.0 ||
      lon > 180.0) {
    std::ostringstream msg;
    msg << "coordinate out of range: (" << lat << ", " << lon << ")";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
}

Polyline::Polyline(std::vector<GeoPoint> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "polyline needs at least two vertices");
  }
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double lat1 = a.lat() * kDegToRad;
  const double lat2 = b.lat() * kDegToRad;
  const double sdlat = std::sin((lat2 - lat1) / 2.0);
  const double sdlon = std::sin((b.lon() - a.lon()) * kDegToRad / 2.0);
  double h = sdlat * sdlat + std::cos(lat1) * std::cos(lat2) * sdlon * sdlon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

PlanarOffset local_project(const GeoPoint& origin, const GeoPoint& p) {
  const double d = haversine_distance(origin, p);
  if (d > kProjectionGuardM) {
    std::ostringstream msg;
    msg << "point (" << p.lat() << ", " << p.lon() << ") is " << d
        << " m from projection origin; limit is " << kProjectionGuardM << " m";
    throw Error(ErrorKind::ProjectionRange, msg.str());
  }
  return project_unchecked(origin, p);
}

GeoPoint local_unproject(const GeoPoint& origin, PlanarOffset offset) {
  const double lat = origin.lat() + offset.y / kEarthRadiusM / kDegToRad;
  double lon = origin.lon() +
               offset.x / (kEarthRadiusM * std::cos(origin.lat() * kDegToRad)) / kDegToRad;
  if (lon > 180.0) lon -= 360.0;
  if (lon < -180.0) lon += 360.0;
  return GeoPoint(lat, lon);
}

double point_polyline_distance(const GeoPoint& p, const Polyline& line) {
  const auto v = line.vertices();
  double best = std::numeric_limits<double>::infinity();
  PlanarOffset prev = local_project(p, v[0]);
  for (std::size_t i = 1; i < v.size(); ++i) {
    const PlanarOffset cur = local_project(p, v[i]);
    best = std::min(best, origin_segment_distance(prev, cur));
    prev = cur;
  }
  return best;
}

double point_polyline_distance(const GeoPoint& p, const Polyline& line, double cull_radius) {
  const auto v = line.vertices();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) {
    best = std::min(best, culled_segment_distance(p, v[i - 1], v[i], cull_radius, 0));
  }
  return best;
}

}  // namespace geosafety
