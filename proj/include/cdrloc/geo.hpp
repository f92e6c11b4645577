// Copyright 2026 The cdrloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CDRLOC_GEO_HPP_
#define CDRLOC_GEO_HPP_

#include <cmath>
#include <numbers>
#include <vector>

#include "cdrloc/errors.hpp"

namespace cdrloc::geo {

/// Mean Earth radius, meters.
inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Meters per degree of latitude on the spherical Earth model.
inline constexpr double kMetersPerDegLat =
    kEarthRadiusM * std::numbers::pi / 180.0;

/// Points farther than this from a projection origin are rejected; the
/// planar approximation is not supported beyond it.
inline constexpr double kMaxProjectionRangeM = 500'000.0;

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// WGS-84 geographic coordinate, degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  bool is_valid() const {
    return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 &&
           lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
  }
};

/// Planar point in meters east (x) / north (y) of a projection origin.
struct LocalPoint {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const LocalPoint& a, const LocalPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline double distance_sq(const LocalPoint& a, const LocalPoint& b) {
  double dx = a.x - b.x;
  double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Directed line segment between two distinct local points.
struct Segment {
  LocalPoint a;
  LocalPoint b;
};

/// Great-circle distance in meters between two geographic points.
double haversine_m(const GeoPoint& p, const GeoPoint& q);

/// Local equirectangular projection centered on an origin point.
///
/// One degree of longitude is scaled by cos(origin latitude); the frame is
/// linear in both directions, so the round trip is exact up to floating
/// point. Points beyond kMaxProjectionRangeM from the origin are rejected.
class LocalProjection {
 public:
  LocalProjection() : LocalProjection(GeoPoint{0.0, 0.0}) {}
  explicit LocalProjection(const GeoPoint& origin)
      : origin_(origin),
        meters_per_deg_lon_(kMetersPerDegLat * std::cos(deg2rad(origin.lat))) {
  }

  const GeoPoint& origin() const { return origin_; }
  double meters_per_deg_lat() const { return kMetersPerDegLat; }
  double meters_per_deg_lon() const { return meters_per_deg_lon_; }

  /// Throws OutOfProjectionRange beyond kMaxProjectionRangeM.
  LocalPoint to_local(const GeoPoint& p) const;
  GeoPoint from_local(const LocalPoint& p) const;

 private:
  GeoPoint origin_;
  double meters_per_deg_lon_;
};

/// Closest point of segment `s` to `p`: the orthogonal foot when it falls
/// within the segment, otherwise the nearer endpoint.
LocalPoint project_to_segment(const LocalPoint& p, const Segment& s);

/// Point-to-segment distance in meters (local frame).
inline double distance_to_segment(const LocalPoint& p, const Segment& s) {
  return distance(p, project_to_segment(p, s));
}

/// Ray-casting point-in-polygon test; boundary points count as inside.
/// Throws DegeneratePolygon for fewer than 3 vertices.
bool point_in_polygon(const LocalPoint& p,
                      const std::vector<LocalPoint>& polygon);

}  // namespace cdrloc::geo

#endif  // CDRLOC_GEO_HPP_
