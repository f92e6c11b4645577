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

#include "cdrloc/mapmatch.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cdrloc/errors.hpp"
#include "cdrloc/io.hpp"

namespace cdrloc::mapmatch {
namespace {

struct CandidatePoint {
  geo::LocalPoint point;
  double distance_m = 0.0;
  std::size_t id = 0;
};

}  // namespace

RoadNetwork::RoadNetwork(std::vector<geo::Segment> segments, double grid_cell_m)
    : segments_(std::move(segments)), grid_cell_m_(grid_cell_m) {
  if (segments_.empty()) return;
  double max_x = segments_[0].a.x;
  double max_y = segments_[0].a.y;
  min_x_ = max_x;
  min_y_ = max_y;
  for (const auto& s : segments_) {
    min_x_ = std::min({min_x_, s.a.x, s.b.x});
    min_y_ = std::min({min_y_, s.a.y, s.b.y});
    max_x = std::max({max_x, s.a.x, s.b.x});
    max_y = std::max({max_y, s.a.y, s.b.y});
  }
  cols_ = static_cast<int>((max_x - min_x_) / grid_cell_m_) + 1;
  rows_ = static_cast<int>((max_y - min_y_) / grid_cell_m_) + 1;
  grid_.resize(static_cast<std::size_t>(cols_) * rows_);

  for (std::size_t id = 0; id < segments_.size(); ++id) {
    const auto& s = segments_[id];
    int c0 = static_cast<int>((std::min(s.a.x, s.b.x) - min_x_) / grid_cell_m_);
    int c1 = static_cast<int>((std::max(s.a.x, s.b.x) - min_x_) / grid_cell_m_);
    int r0 = static_cast<int>((std::min(s.a.y, s.b.y) - min_y_) / grid_cell_m_);
    int r1 = static_cast<int>((std::max(s.a.y, s.b.y) - min_y_) / grid_cell_m_);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        grid_[static_cast<std::size_t>(r) * cols_ + c].push_back(
            static_cast<std::uint32_t>(id));
      }
    }
  }
}

std::vector<std::size_t> RoadNetwork::candidates_in_disc(
    const geo::LocalPoint& p, double radius_m) const {
  std::vector<std::size_t> out;
  if (segments_.empty()) return out;
  int c0 = static_cast<int>(std::floor((p.x - radius_m - min_x_) / grid_cell_m_));
  int c1 = static_cast<int>(std::floor((p.x + radius_m - min_x_) / grid_cell_m_));
  int r0 = static_cast<int>(std::floor((p.y - radius_m - min_y_) / grid_cell_m_));
  int r1 = static_cast<int>(std::floor((p.y + radius_m - min_y_) / grid_cell_m_));
  c0 = std::clamp(c0, 0, cols_ - 1);
  c1 = std::clamp(c1, 0, cols_ - 1);
  r0 = std::clamp(r0, 0, rows_ - 1);
  r1 = std::clamp(r1, 0, rows_ - 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const auto& bucket = grid_[static_cast<std::size_t>(r) * cols_ + c];
      out.insert(out.end(), bucket.begin(), bucket.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> segments_in_radius(const RoadNetwork& net,
                                            const geo::LocalPoint& p,
                                            double radius_m,
                                            bool segment_distance) {
  std::vector<std::size_t> out;
  const double r_sq = radius_m * radius_m;
  for (std::size_t id : net.candidates_in_disc(p, radius_m)) {
    const geo::Segment& s = net.segments()[id];
    bool hit;
    if (segment_distance) {
      hit = geo::distance_to_segment(p, s) <= radius_m;
    } else {
      // Closed endpoint predicate: either endpoint within the disc.
      hit = geo::distance_sq(p, s.a) <= r_sq || geo::distance_sq(p, s.b) <= r_sq;
    }
    if (hit) out.push_back(id);
  }
  return out;
}

std::string_view to_string(MatchStatus status) {
  return status == MatchStatus::kMatched ? "MATCHED" : "UNMATCHED";
}

namespace {

MatchStatus parse_status(std::string_view text) {
  if (text == "MATCHED") return MatchStatus::kMatched;
  if (text == "UNMATCHED") return MatchStatus::kUnmatched;
  throw ConfigError("unknown match status: " + std::string(text));
}

/// Shared expand-and-pick loop over a candidate generator. The generator
/// fills CandidatePoints for one radius; the winner minimizes great-circle
/// distance with ties to the smallest id.
template <typename Gen>
MatchResult expand_and_pick(const geo::LocalPoint& p,
                            const geo::LocalProjection& projection,
                            const MatchConfig& config, Gen&& generate) {
  MatchResult result;
  result.input = p;
  result.matched = p;

  const geo::GeoPoint p_geo = projection.from_local(p);
  int attempts = config.policy == ExpandPolicy::kExpand
                     ? config.max_doublings + 1
                     : 1;
  double radius = config.radius_m;
  std::vector<CandidatePoint> candidates;
  for (int attempt = 0; attempt < attempts; ++attempt, radius *= 2.0) {
    result.radius_used_m = radius;
    candidates.clear();
    generate(radius, candidates);
    if (candidates.empty()) continue;
    const CandidatePoint* best = nullptr;
    for (auto& cand : candidates) {
      cand.distance_m =
          geo::haversine_m(p_geo, projection.from_local(cand.point));
      // Ascending-id iteration makes strict < keep the smallest id on ties.
      if (best == nullptr || cand.distance_m < best->distance_m) {
        best = &cand;
      }
    }
    result.matched = best->point;
    result.segment_id = static_cast<std::int64_t>(best->id);
    result.distance_m = best->distance_m;
    result.status = MatchStatus::kMatched;
    return result;
  }
  return result;
}

}  // namespace

MatchResult match_point(const RoadNetwork& net, const geo::LocalPoint& p,
                        const geo::LocalProjection& projection,
                        const MatchConfig& config) {
  return expand_and_pick(
      p, projection, config,
      [&](double radius, std::vector<CandidatePoint>& out) {
        for (std::size_t id : segments_in_radius(
                 net, p, radius, config.segment_distance_query)) {
          out.push_back(CandidatePoint{
              geo::project_to_segment(p, net.segments()[id]), 0.0, id});
        }
      });
}

MatchResult match_to_centroids(std::span<const geo::LocalPoint> centroids,
                               const geo::LocalPoint& p,
                               const geo::LocalProjection& projection,
                               const MatchConfig& config) {
  return expand_and_pick(
      p, projection, config,
      [&](double radius, std::vector<CandidatePoint>& out) {
        const double r_sq = radius * radius;
        for (std::size_t id = 0; id < centroids.size(); ++id) {
          if (geo::distance_sq(p, centroids[id]) <= r_sq) {
            out.push_back(CandidatePoint{centroids[id], 0.0, id});
          }
        }
      });
}

std::vector<MatchRow> match_trajectory(
    std::span<const skf::EstimateRow> estimates, const RoadNetwork& net,
    const geo::LocalProjection& projection, const MatchConfig& config,
    std::span<const geo::LocalPoint> building_centroids) {
  std::vector<MatchRow> rows;
  rows.reserve(estimates.size());
  for (const auto& est : estimates) {
    MatchRow row;
    row.imsi = est.imsi;
    row.timestamp = est.timestamp;
    row.label = est.label;
    row.estimated = est.position;
    row.matched = est.position;

    const bool snap_stay =
        config.match_stay_buildings && !building_centroids.empty();
    if (est.label == EpisodeLabel::kMove ||
        (est.label == EpisodeLabel::kStay && snap_stay)) {
      geo::LocalPoint p = projection.to_local(est.position);
      MatchResult result =
          est.label == EpisodeLabel::kMove
              ? match_point(net, p, projection, config)
              : match_to_centroids(building_centroids, p, projection, config);
      if (result.status == MatchStatus::kMatched) {
        row.matched = projection.from_local(result.matched);
        row.segment_id = result.segment_id;
        row.distance_m = result.distance_m;
        row.status = MatchStatus::kMatched;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string matches_to_csv(std::span<const MatchRow> rows) {
  std::string out =
      "imsi,timestamp,label,est_lat,est_lon,matched_lat,matched_lon,"
      "segment_id,distance_m,status\n";
  for (const auto& row : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", row.imsi,
                       row.timestamp, to_string(row.label),
                       io::format_double(row.estimated.lat),
                       io::format_double(row.estimated.lon),
                       io::format_double(row.matched.lat),
                       io::format_double(row.matched.lon), row.segment_id,
                       io::format_double(row.distance_m),
                       to_string(row.status));
  }
  return out;
}

std::vector<MatchRow> parse_matches(std::istream& in) {
  std::vector<MatchRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput("missing header row");
  const std::string_view expected =
      "imsi,timestamp,label,est_lat,est_lon,matched_lat,matched_lon,"
      "segment_id,distance_m,status";
  if (io::strip_cr(line) != expected) {
    throw MalformedRow(1, fmt::format("expected header '{}', got '{}'",
                                      expected, io::strip_cr(line)));
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = io::strip_cr(line);
    if (body.empty()) continue;
    auto fields = io::split_csv_line(body);
    if (fields.size() != 10) {
      throw MalformedRow(line_no,
                         fmt::format("expected 10 fields, got {}", fields.size()));
    }
    MatchRow row;
    row.imsi = fields[0];
    try {
      row.timestamp = std::stoll(fields[1]);
      row.label = parse_episode_label(fields[2]);
      row.estimated.lat = io::parse_double(fields[3]);
      row.estimated.lon = io::parse_double(fields[4]);
      row.matched.lat = io::parse_double(fields[5]);
      row.matched.lon = io::parse_double(fields[6]);
      row.segment_id = std::stoll(fields[7]);
      row.distance_m = io::parse_double(fields[8]);
      row.status = parse_status(fields[9]);
    } catch (const ConfigError& e) {
      throw MalformedRow(line_no, e.what());
    } catch (const std::exception&) {
      throw MalformedRow(line_no, "non-numeric field");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cdrloc::mapmatch
