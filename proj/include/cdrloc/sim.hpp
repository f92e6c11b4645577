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

#ifndef CDRLOC_SIM_HPP_
#define CDRLOC_SIM_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cdrloc/coverage.hpp"
#include "cdrloc/geo.hpp"
#include "cdrloc/ingest.hpp"
#include "cdrloc/types.hpp"

namespace cdrloc::sim {

/// Everything below is a deterministic function of this config; the seed
/// alone separates runs.
struct SimConfig {
  std::uint64_t seed = 1;
  double extent_km = 7.6;          // square world side
  int n_cells = 25;
  double cell_pitch_m = 2000.0;    // antenna neighbor spacing
  int n_users = 6;
  double duration_s = 216000.0;    // per-user observation window
  double stay_dwell_min_s = 1200.0;
  double stay_dwell_max_s = 3000.0;
  double move_leg_min_s = 600.0;   // target leg duration range
  double move_leg_max_s = 1200.0;
  double move_speed_min = 2.0;     // m/s
  double move_speed_max = 12.0;
  double event_rate_per_hour = 6.0;
  double selection_sigma = 0.5;    // cell-selection score noise
  // True serving reach as a multiple of the polygon circumradius, drawn
  // per cell; > 1 makes devices connect outside the mapped polygon.
  double reach_min = 1.0;
  double reach_max = 1.0;
  double road_spacing_m = 500.0;
  double road_jitter_m = 20.0;     // road vertex perturbation
  // Dwell sites sit set back from the road lattice by a per-dwell offset
  // drawn from this range; 0 keeps dwells exactly on the nodes.
  double dwell_offset_min_m = 0.0;
  double dwell_offset_max_m = 0.0;
  double truth_interval_s = 60.0;  // dense truth sampling step
  double origin_lat = 58.38;
  double origin_lon = 26.72;
  std::int64_t start_timestamp = 1600000000;
};

/// Throws ConfigError naming the offending field.
void validate_config(const SimConfig& config);

/// Deterministic generator seed for one purpose / index pair, derived from
/// the run seed by a fixed label hash so partial re-runs agree.
std::mt19937_64 substream(std::uint64_t seed, std::string_view label,
                          std::uint64_t index = 0);

struct CellSite {
  std::string cell_id;
  geo::LocalPoint antenna;
  std::vector<geo::LocalPoint> hexagon;  // 6 vertices, open ring
  double reach_radius_m = 0.0;  // true serving reach; 0 = polygon radius
};

struct World {
  geo::LocalProjection anchor;
  std::vector<CellSite> cells;
  std::vector<std::vector<geo::LocalPoint>> roads;  // grid polylines
};

/// Antennas on a pointy-top hexagonal lattice centered on the extent, with
/// the hexagons as coverage polygons; roads as a perturbed grid whose ideal
/// lines carry the truth tracks.
World generate_world(const SimConfig& config);

std::string coverage_geojson(const World& world);
std::string roads_geojson(const World& world);

/// One motion episode; position interpolates linearly from p0 at t0 to p1
/// at t1 (stay keeps p0 = p1). Boundaries are continuous so constant-speed
/// legs stay exact at the integer sampling times.
struct Episode {
  EpisodeLabel label = EpisodeLabel::kStay;
  double t0 = 0.0;
  double t1 = 0.0;
  geo::LocalPoint p0;
  geo::LocalPoint p1;
};

struct TruthTrack {
  std::string user;
  std::vector<Episode> episodes;
  std::vector<ingest::TruthFix> fixes;  // dense sampling of the episodes
};

/// Exact position at time t (clamped to the track span).
geo::LocalPoint track_position(const TruthTrack& track, double t);

/// Alternating stay/move episodes on the ideal road grid: dwells sit at
/// grid nodes displaced by the configured setback offset, constant-speed
/// legs run between consecutive dwell sites. A degenerate speed range
/// produces a single stay episode.
std::vector<TruthTrack> generate_truth(const SimConfig& config,
                                       const World& world);

/// Score-maximizing serving cell: -distance/radius plus Gaussian noise per
/// cell. sigma = 0 reduces to the deterministic argmax; ties go to the
/// lowest cell index.
std::size_t serving_cell(const World& world, const geo::LocalPoint& p,
                         double sigma, std::mt19937_64& rng);

struct CdrSample {
  std::vector<ingest::CdrRecord> records;
  std::vector<coverage::RadiusObservation> observations;
};

/// Sparse event sampling: per-user Poisson arrivals over the track span,
/// serving cell drawn at the true position, one paired ground-truth
/// observation row per record.
CdrSample sample_cdr(const SimConfig& config, const World& world,
                     std::span<const TruthTrack> tracks);

}  // namespace cdrloc::sim

#endif  // CDRLOC_SIM_HPP_
