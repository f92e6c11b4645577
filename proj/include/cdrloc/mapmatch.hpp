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

#ifndef CDRLOC_MAPMATCH_HPP_
#define CDRLOC_MAPMATCH_HPP_

#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "cdrloc/geo.hpp"
#include "cdrloc/skf.hpp"
#include "cdrloc/types.hpp"

namespace cdrloc::mapmatch {

/// Immutable road set with a uniform-grid index for radius queries. The
/// index accelerates lookup only; query semantics are defined by the
/// endpoint predicate in segments_in_radius.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  explicit RoadNetwork(std::vector<geo::Segment> segments,
                       double grid_cell_m = 500.0);

  const std::vector<geo::Segment>& segments() const { return segments_; }
  double grid_cell_m() const { return grid_cell_m_; }

  /// Segment ids (indices into segments()) whose bounding box intersects
  /// the query disc, sorted ascending. A superset of any distance-based
  /// candidate set.
  std::vector<std::size_t> candidates_in_disc(const geo::LocalPoint& p,
                                              double radius_m) const;

 private:
  std::vector<geo::Segment> segments_;
  double grid_cell_m_ = 500.0;
  double min_x_ = 0.0;
  double min_y_ = 0.0;
  int cols_ = 0;
  int rows_ = 0;
  // Grid cell -> segment ids whose AABB overlaps the cell.
  std::vector<std::vector<std::uint32_t>> grid_;
};

/// Segments with at least one endpoint within r of p (closed comparison).
/// With segment_distance true the predicate is the true point-to-segment
/// distance instead.
std::vector<std::size_t> segments_in_radius(const RoadNetwork& net,
                                            const geo::LocalPoint& p,
                                            double radius_m,
                                            bool segment_distance = false);

enum class MatchStatus { kMatched, kUnmatched };

std::string_view to_string(MatchStatus status);

struct MatchResult {
  geo::LocalPoint input;
  geo::LocalPoint matched;  // equals input when unmatched
  std::int64_t segment_id = -1;
  double distance_m = 0.0;
  double radius_used_m = 0.0;
  MatchStatus status = MatchStatus::kUnmatched;
};

enum class ExpandPolicy {
  kExpand,  // double the radius up to max_doublings, then give up
  kStrict,  // single attempt
};

struct MatchConfig {
  double radius_m = 2000.0;
  int max_doublings = 4;
  ExpandPolicy policy = ExpandPolicy::kExpand;
  bool segment_distance_query = false;
  double grid_cell_m = 500.0;
  bool match_stay_buildings = false;
};

/// Snaps one point: candidates are the clamped orthogonal projections onto
/// every segment in radius; the winner minimizes great-circle distance
/// (computed after converting back to geographic coordinates), ties going
/// to the smallest segment id.
MatchResult match_point(const RoadNetwork& net, const geo::LocalPoint& p,
                        const geo::LocalProjection& projection,
                        const MatchConfig& config);

/// Nearest-centroid variant used for stay points when building matching is
/// enabled; centroids compete under the same minimal-distance rule.
MatchResult match_to_centroids(std::span<const geo::LocalPoint> centroids,
                               const geo::LocalPoint& p,
                               const geo::LocalProjection& projection,
                               const MatchConfig& config);

struct MatchRow {
  std::string imsi;
  std::int64_t timestamp = 0;
  EpisodeLabel label = EpisodeLabel::kStay;
  geo::GeoPoint estimated;
  geo::GeoPoint matched;
  std::int64_t segment_id = -1;
  double distance_m = 0.0;
  MatchStatus status = MatchStatus::kUnmatched;
};

/// Matches move-labeled estimates to roads; stay-labeled estimates pass
/// through unmatched unless building matching is enabled and centroids are
/// provided. Output preserves input order and size.
std::vector<MatchRow> match_trajectory(
    std::span<const skf::EstimateRow> estimates, const RoadNetwork& net,
    const geo::LocalProjection& projection, const MatchConfig& config,
    std::span<const geo::LocalPoint> building_centroids = {});

/// Serializes `imsi,timestamp,label,est_lat,est_lon,matched_lat,
/// matched_lon,segment_id,distance_m,status` CSV.
std::string matches_to_csv(std::span<const MatchRow> rows);

/// Parses the matched CSV back.
std::vector<MatchRow> parse_matches(std::istream& in);

}  // namespace cdrloc::mapmatch

#endif  // CDRLOC_MAPMATCH_HPP_
