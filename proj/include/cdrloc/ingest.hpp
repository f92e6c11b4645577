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

#ifndef CDRLOC_INGEST_HPP_
#define CDRLOC_INGEST_HPP_

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdrloc/geo.hpp"
#include "cdrloc/types.hpp"

namespace cdrloc::ingest {

/// One billing event.
struct CdrRecord {
  std::string imsi;
  std::string imei;
  std::string cell_id;
  std::int64_t timestamp = 0;  // UTC seconds
  EventKind event = EventKind::kOther;
};

/// Antenna site with its polygonal coverage area and the derived
/// enclosing circle used by the filter and the radius calibration.
struct CellCoverage {
  std::string cell_id;
  geo::GeoPoint antenna;
  std::optional<double> azimuth_deg;  // absent means omnidirectional
  std::vector<geo::GeoPoint> polygon;

  // Derived by coverage::attach_circles.
  geo::LocalPoint circle_center;
  double base_radius_m = 0.0;
  // Learned by coverage::optimize_extensions; 0 until calibrated.
  double extension_m = 0.0;

  double effective_radius_m() const { return base_radius_m + extension_m; }
};

/// Cell map sharing one local projection (centered on the antenna centroid).
struct CoverageSet {
  geo::LocalProjection projection;
  std::vector<CellCoverage> cells;
  std::unordered_map<std::string, std::size_t> index_by_id;

  const CellCoverage* find(const std::string& cell_id) const {
    auto it = index_by_id.find(cell_id);
    return it == index_by_id.end() ? nullptr : &cells[it->second];
  }
};

struct TrajectoryEvent {
  std::int64_t timestamp = 0;
  std::string cell_id;
};

/// Time-ordered cell event sequence for one subscriber.
struct Trajectory {
  std::string user;
  std::vector<TrajectoryEvent> events;
};

/// GPS ground-truth fix with its movement annotation.
struct TruthFix {
  std::string user;
  std::int64_t timestamp = 0;
  geo::GeoPoint location;
  EpisodeLabel label = EpisodeLabel::kStay;
};

/// Parses `imsi,imei,cell_id,timestamp,event` CSV.
/// Throws MalformedRow with the offending line number, EmptyInput for a
/// stream without a header.
std::vector<CdrRecord> parse_cdr(std::istream& in);

/// Parses a GeoJSON FeatureCollection of cell polygons. Each feature needs a
/// Polygon geometry plus `cell_id`, `antenna_lat`, `antenna_lon` properties;
/// `azimuth` may be null or absent for omnidirectional sites. The returned
/// set carries a projection centered on the antenna centroid, with enclosing
/// circles already attached.
CoverageSet parse_coverage(std::istream& in, double azimuth_shift = 0.5);

struct RoadData {
  std::vector<geo::Segment> segments;
  int dropped_zero_length = 0;
};

/// Parses a GeoJSON FeatureCollection of LineString roads into local-frame
/// segments. Zero-length pieces are dropped and counted.
RoadData parse_roads(std::istream& in, const geo::LocalProjection& projection);

/// Parses `imsi,timestamp,lat,lon,label` CSV.
std::vector<TruthFix> parse_truth(std::istream& in);

/// Groups records by IMSI and sorts each group by timestamp (stable, so
/// same-timestamp events keep input order). Exact (timestamp, cell_id)
/// duplicates are collapsed. Trajectories come back sorted by user key.
std::vector<Trajectory> build_trajectories(std::span<const CdrRecord> records);

/// Drops records whose cell_id is not present in the coverage set.
/// Returns the number dropped.
int drop_unresolvable(std::vector<CdrRecord>& records,
                      const CoverageSet& coverage);

// Serializers emitting exactly the formats the parsers accept.
std::string to_csv(std::span<const CdrRecord> records);
std::string to_csv(std::span<const TruthFix> fixes);

}  // namespace cdrloc::ingest

#endif  // CDRLOC_INGEST_HPP_
