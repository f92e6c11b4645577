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

#include "cdrloc/geo.hpp"

#include <algorithm>
#include <cmath>

namespace cdrloc::geo {

double haversine_m(const GeoPoint& p, const GeoPoint& q) {
  double phi1 = deg2rad(p.lat);
  double phi2 = deg2rad(q.lat);
  double dphi = deg2rad(q.lat - p.lat);
  double dlambda = deg2rad(q.lon - p.lon);

  double sin_dphi = std::sin(dphi / 2.0);
  double sin_dlambda = std::sin(dlambda / 2.0);
  double a = sin_dphi * sin_dphi +
             std::cos(phi1) * std::cos(phi2) * sin_dlambda * sin_dlambda;
  a = std::clamp(a, 0.0, 1.0);
  double c = 2.0 * std::atan2(std::sqrt(a), std::sqrt(1.0 - a));
  return kEarthRadiusM * c;
}

LocalPoint LocalProjection::to_local(const GeoPoint& p) const {
  double range = haversine_m(origin_, p);
  if (!(range <= kMaxProjectionRangeM)) {
    throw OutOfProjectionRange("point " + std::to_string(range / 1000.0) +
                               " km from projection origin");
  }
  double dlon = p.lon - origin_.lon;
  // Normalize across the antimeridian; in-range points stay well below 180.
  if (dlon > 180.0) dlon -= 360.0;
  if (dlon < -180.0) dlon += 360.0;
  return LocalPoint{dlon * meters_per_deg_lon_,
                    (p.lat - origin_.lat) * kMetersPerDegLat};
}

GeoPoint LocalProjection::from_local(const LocalPoint& p) const {
  double range = std::hypot(p.x, p.y);
  if (!(range <= kMaxProjectionRangeM)) {
    throw OutOfProjectionRange("local point " +
                               std::to_string(range / 1000.0) +
                               " km from projection origin");
  }
  double lon = origin_.lon + p.x / meters_per_deg_lon_;
  if (lon > 180.0) lon -= 360.0;
  if (lon < -180.0) lon += 360.0;
  return GeoPoint{origin_.lat + p.y / kMetersPerDegLat, lon};
}

LocalPoint project_to_segment(const LocalPoint& p, const Segment& s) {
  double vx = s.b.x - s.a.x;
  double vy = s.b.y - s.a.y;
  double len_sq = vx * vx + vy * vy;
  if (len_sq == 0.0) return s.a;
  double t = ((p.x - s.a.x) * vx + (p.y - s.a.y) * vy) / len_sq;
  t = std::clamp(t, 0.0, 1.0);
  return LocalPoint{s.a.x + t * vx, s.a.y + t * vy};
}

namespace {

bool on_segment(const LocalPoint& p, const LocalPoint& a, const LocalPoint& b) {
  constexpr double kBoundaryTolM = 1e-9;
  return distance_sq(p, project_to_segment(p, Segment{a, b})) <=
         kBoundaryTolM * kBoundaryTolM;
}

}  // namespace

bool point_in_polygon(const LocalPoint& p,
                      const std::vector<LocalPoint>& polygon) {
  if (polygon.size() < 3) {
    throw DegeneratePolygon("polygon has " + std::to_string(polygon.size()) +
                            " vertices, need at least 3");
  }
  std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (on_segment(p, polygon[i], polygon[(i + 1) % n])) return true;
  }
  // Crossing-number ray cast with the half-open edge rule.
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const LocalPoint& a = polygon[i];
    const LocalPoint& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

}  // namespace cdrloc::geo
