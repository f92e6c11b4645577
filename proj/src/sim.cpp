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

#include "cdrloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "cdrloc/errors.hpp"

namespace cdrloc::sim {
namespace {

using nlohmann::json;

void require(bool ok, const char* field, const char* rule) {
  if (!ok) throw ConfigError(fmt::format("sim.{} {}", field, rule));
}

json geojson_coordinate(const geo::LocalProjection& anchor,
                        const geo::LocalPoint& p) {
  geo::GeoPoint g = anchor.from_local(p);
  return json::array({g.lon, g.lat});
}

struct Lattice {
  int rows = 1;
  int cols = 1;
};

Lattice lattice_shape(int n_cells) {
  Lattice shape;
  shape.rows = std::max(1, static_cast<int>(std::sqrt(
                               static_cast<double>(n_cells))));
  shape.cols = (n_cells + shape.rows - 1) / shape.rows;
  return shape;
}

}  // namespace

void validate_config(const SimConfig& config) {
  require(config.extent_km > 0, "extent_km", "must be > 0");
  require(config.n_cells >= 1, "n_cells", "must be >= 1");
  require(config.cell_pitch_m > 0, "cell_pitch_m", "must be > 0");
  require(config.n_users >= 1, "n_users", "must be >= 1");
  require(config.duration_s > 0, "duration_s", "must be > 0");
  require(config.stay_dwell_min_s > 0, "stay_dwell_min_s", "must be > 0");
  require(config.stay_dwell_max_s >= config.stay_dwell_min_s,
          "stay_dwell_max_s", "must be >= stay_dwell_min_s");
  require(config.move_leg_min_s > 0, "move_leg_min_s", "must be > 0");
  require(config.move_leg_max_s >= config.move_leg_min_s, "move_leg_max_s",
          "must be >= move_leg_min_s");
  require(config.move_speed_min >= 0, "move_speed_min", "must be >= 0");
  require(config.move_speed_max >= config.move_speed_min, "move_speed_max",
          "must be >= move_speed_min");
  require(config.event_rate_per_hour >= 0, "event_rate_per_hour",
          "must be >= 0");
  require(config.selection_sigma >= 0, "selection_sigma", "must be >= 0");
  require(config.reach_min > 0, "reach_min", "must be > 0");
  require(config.reach_max >= config.reach_min, "reach_max",
          "must be >= reach_min");
  require(config.road_spacing_m > 0, "road_spacing_m", "must be > 0");
  require(config.road_jitter_m >= 0, "road_jitter_m", "must be >= 0");
  require(config.dwell_offset_min_m >= 0, "dwell_offset_min_m",
          "must be >= 0");
  require(config.dwell_offset_max_m >= config.dwell_offset_min_m,
          "dwell_offset_max_m", "must be >= dwell_offset_min_m");
  // Keeps every dwell nearer its own node than either neighbour road, so
  // travel legs retain positive length.
  require(config.dwell_offset_max_m <= 0.45 * config.road_spacing_m,
          "dwell_offset_max_m", "must be <= 0.45 * road_spacing_m");
  require(config.truth_interval_s >= 1, "truth_interval_s", "must be >= 1");
  require(geo::GeoPoint{config.origin_lat, config.origin_lon}.is_valid(),
          "origin_lat/origin_lon", "must be a valid coordinate");
  require(config.start_timestamp > 0, "start_timestamp", "must be > 0");
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view label,
                          std::uint64_t index) {
  // FNV-1a over the label and index keeps purposes decorrelated while the
  // run seed alone separates runs.
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  for (char c : label) mix(static_cast<unsigned char>(c));
  for (int i = 0; i < 8; ++i) {
    mix(static_cast<unsigned char>((index >> (8 * i)) & 0xFF));
  }
  return std::mt19937_64(seed ^ h);
}

World generate_world(const SimConfig& config) {
  validate_config(config);
  World world;
  world.anchor = geo::LocalProjection(
      geo::GeoPoint{config.origin_lat, config.origin_lon});

  // Pointy-top hexagons with neighbor distance = pitch tile the plane:
  // circumradius pitch/sqrt(3), row spacing 1.5 * circumradius.
  const double s = config.cell_pitch_m / std::sqrt(3.0);
  const Lattice shape = lattice_shape(config.n_cells);
  const double row_dy = 1.5 * s;
  auto reach_rng = substream(config.seed, "reach");
  std::uniform_real_distribution<double> reach(config.reach_min,
                                               config.reach_max);
  int made = 0;
  for (int r = 0; r < shape.rows && made < config.n_cells; ++r) {
    for (int c = 0; c < shape.cols && made < config.n_cells; ++c, ++made) {
      CellSite site;
      site.cell_id = fmt::format("cell-{:03}", made + 1);
      site.reach_radius_m = s * reach(reach_rng);
      site.antenna.x =
          (c - (shape.cols - 1) / 2.0) * config.cell_pitch_m +
          (r % 2 == 1 ? config.cell_pitch_m / 2.0 : 0.0);
      site.antenna.y = (r - (shape.rows - 1) / 2.0) * row_dy;
      for (int k = 0; k < 6; ++k) {
        double theta = geo::deg2rad(30.0 + 60.0 * k);
        site.hexagon.push_back(
            geo::LocalPoint{site.antenna.x + s * std::cos(theta),
                            site.antenna.y + s * std::sin(theta)});
      }
      world.cells.push_back(std::move(site));
    }
  }

  // Road grid: lines through the node lattice (multiples of the spacing),
  // vertices perturbed but endpoints of travel stay on the ideal nodes.
  auto rng = substream(config.seed, "world");
  std::normal_distribution<double> jitter(0.0, 1.0);
  const double half = config.extent_km * 500.0;
  const int m_max = static_cast<int>(half / config.road_spacing_m);
  auto jittered = [&](double x, double y) {
    if (config.road_jitter_m <= 0.0) return geo::LocalPoint{x, y};
    return geo::LocalPoint{x + config.road_jitter_m * jitter(rng),
                           y + config.road_jitter_m * jitter(rng)};
  };
  for (int m = -m_max; m <= m_max; ++m) {
    std::vector<geo::LocalPoint> line;
    for (int k = -m_max; k <= m_max; ++k) {
      line.push_back(jittered(m * config.road_spacing_m,
                              k * config.road_spacing_m));
    }
    world.roads.push_back(std::move(line));
  }
  for (int m = -m_max; m <= m_max; ++m) {
    std::vector<geo::LocalPoint> line;
    for (int k = -m_max; k <= m_max; ++k) {
      line.push_back(jittered(k * config.road_spacing_m,
                              m * config.road_spacing_m));
    }
    world.roads.push_back(std::move(line));
  }
  return world;
}

std::string coverage_geojson(const World& world) {
  json features = json::array();
  for (const auto& cell : world.cells) {
    json ring = json::array();
    for (const auto& v : cell.hexagon) {
      ring.push_back(geojson_coordinate(world.anchor, v));
    }
    ring.push_back(ring.front());
    geo::GeoPoint antenna = world.anchor.from_local(cell.antenna);
    features.push_back(json{
        {"type", "Feature"},
        {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}},
        {"properties",
         {{"cell_id", cell.cell_id},
          {"antenna_lat", antenna.lat},
          {"antenna_lon", antenna.lon},
          {"azimuth", nullptr}}},
    });
  }
  json doc{{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump(2) + "\n";
}

std::string roads_geojson(const World& world) {
  json features = json::array();
  for (const auto& line : world.roads) {
    json coords = json::array();
    for (const auto& v : line) {
      coords.push_back(geojson_coordinate(world.anchor, v));
    }
    features.push_back(json{
        {"type", "Feature"},
        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
        {"properties", json::object()},
    });
  }
  json doc{{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump(2) + "\n";
}

geo::LocalPoint track_position(const TruthTrack& track, double t) {
  if (track.episodes.empty()) return geo::LocalPoint{0.0, 0.0};
  if (t <= track.episodes.front().t0) return track.episodes.front().p0;
  if (t >= track.episodes.back().t1) return track.episodes.back().p1;
  // Episodes are contiguous and time-sorted.
  auto it = std::upper_bound(
      track.episodes.begin(), track.episodes.end(), t,
      [](double value, const Episode& e) { return value < e.t1; });
  const Episode& e = *it;
  if (e.t1 <= e.t0) return e.p0;
  double u = std::clamp((t - e.t0) / (e.t1 - e.t0), 0.0, 1.0);
  return geo::LocalPoint{e.p0.x + u * (e.p1.x - e.p0.x),
                         e.p0.y + u * (e.p1.y - e.p0.y)};
}

std::vector<TruthTrack> generate_truth(const SimConfig& config,
                                       const World& world) {
  validate_config(config);
  std::vector<TruthTrack> tracks;
  tracks.reserve(config.n_users);

  const double spacing = config.road_spacing_m;
  const double half = config.extent_km * 500.0;
  const int m_walk =
      static_cast<int>(std::floor(half * 0.85 / spacing));
  const double speed_range = config.move_speed_max - config.move_speed_min;
  const bool degenerate_speed = config.move_speed_max <= 0.0 || m_walk < 1;
  // Margin keeps realized chord speeds inside the configured range after
  // leg lengths snap to whole grid steps.
  const double speed_lo = config.move_speed_min + 0.02 * speed_range;
  const double speed_hi = config.move_speed_max - 0.02 * speed_range;

  for (int u = 0; u < config.n_users; ++u) {
    auto rng = substream(config.seed, "truth",
                         static_cast<std::uint64_t>(u));
    TruthTrack track;
    track.user = fmt::format("user-{:02}", u + 1);

    std::uniform_int_distribution<int> node_dist(-m_walk, m_walk);
    int node_x = m_walk >= 1 ? node_dist(rng) : 0;
    int node_y = m_walk >= 1 ? node_dist(rng) : 0;
    auto node_point = [&spacing](int ix, int iy) {
      return geo::LocalPoint{ix * spacing, iy * spacing};
    };

    // Dwell sites sit set back from their lattice node; a dedicated stream
    // keeps the walk itself byte-stable when the offset range changes.
    auto rng_offset = substream(config.seed, "offset",
                                static_cast<std::uint64_t>(u));
    std::uniform_real_distribution<double> offset_mag_dist(
        config.dwell_offset_min_m, config.dwell_offset_max_m);
    std::uniform_real_distribution<double> offset_ang_dist(
        0.0, 2.0 * std::numbers::pi);
    auto dwell_site = [&](int ix, int iy) {
      geo::LocalPoint p = node_point(ix, iy);
      double mag = offset_mag_dist(rng_offset);
      double ang = offset_ang_dist(rng_offset);
      return geo::LocalPoint{p.x + mag * std::cos(ang),
                             p.y + mag * std::sin(ang)};
    };
    geo::LocalPoint current = dwell_site(node_x, node_y);

    const double t_begin = static_cast<double>(config.start_timestamp);
    const double t_end = t_begin + config.duration_s;
    double t = t_begin;
    std::uniform_real_distribution<double> dwell_dist(config.stay_dwell_min_s,
                                                      config.stay_dwell_max_s);
    std::uniform_real_distribution<double> leg_dist(config.move_leg_min_s,
                                                    config.move_leg_max_s);
    std::uniform_real_distribution<double> speed_dist(speed_lo, speed_hi);

    bool staying = true;
    while (t < t_end) {
      if (staying || degenerate_speed) {
        double dwell = degenerate_speed ? (t_end - t) : dwell_dist(rng);
        Episode e;
        e.label = EpisodeLabel::kStay;
        e.t0 = t;
        e.t1 = std::min(t + dwell, t_end);
        e.p0 = e.p1 = current;
        t = e.t1;
        track.episodes.push_back(e);
      } else {
        double target = leg_dist(rng);
        double speed = speed_range > 0.0 ? speed_dist(rng) : speed_lo;
        int steps = std::max(
            1, static_cast<int>(std::llround(speed * target / spacing)));

        // Axis-aligned leg to an in-bounds node; directions that cannot
        // advance at least one step are excluded.
        struct Dir {
          int dx, dy;
        };
        constexpr Dir kDirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        auto room_for = [&](const Dir& d) {
          return d.dx != 0 ? (d.dx > 0 ? m_walk - node_x : m_walk + node_x)
                           : (d.dy > 0 ? m_walk - node_y : m_walk + node_y);
        };
        int feasible[4];
        int n_feasible = 0;
        for (int d = 0; d < 4; ++d) {
          if (room_for(kDirs[d]) >= 1) feasible[n_feasible++] = d;
        }
        std::uniform_int_distribution<int> dir_dist(0, n_feasible - 1);
        const Dir dir = kDirs[feasible[dir_dist(rng)]];
        steps = std::min(steps, room_for(dir));

        Episode e;
        e.label = EpisodeLabel::kMove;
        e.t0 = t;
        e.p0 = current;
        node_x += dir.dx * steps;
        node_y += dir.dy * steps;
        geo::LocalPoint dest = dwell_site(node_x, node_y);
        // Offsets are bounded below half the spacing, so legs keep
        // positive length.
        double length = std::hypot(dest.x - e.p0.x, dest.y - e.p0.y);
        double full_t1 = t + length / speed;
        e.t1 = std::min(full_t1, t_end);
        double u_clip = (e.t1 - e.t0) / (full_t1 - e.t0);
        e.p1 = geo::LocalPoint{e.p0.x + u_clip * (dest.x - e.p0.x),
                               e.p0.y + u_clip * (dest.y - e.p0.y)};
        current = e.p1;
        t = e.t1;
        track.episodes.push_back(e);
      }
      staying = !staying;
    }

    // Dense fixes on integer seconds; each episode owns [t0, t1).
    const auto interval = static_cast<std::int64_t>(config.truth_interval_s);
    for (const auto& e : track.episodes) {
      auto ts = static_cast<std::int64_t>(std::ceil(e.t0));
      for (; static_cast<double>(ts) < e.t1; ts += interval) {
        ingest::TruthFix fix;
        fix.user = track.user;
        fix.timestamp = ts;
        fix.location = world.anchor.from_local(
            track_position(track, static_cast<double>(ts)));
        fix.label = e.label;
        track.fixes.push_back(std::move(fix));
      }
    }
    if (!track.episodes.empty()) {
      auto last_ts = static_cast<std::int64_t>(
          std::floor(track.episodes.back().t1));
      if (track.fixes.empty() || track.fixes.back().timestamp != last_ts) {
        ingest::TruthFix fix;
        fix.user = track.user;
        fix.timestamp = last_ts;
        fix.location = world.anchor.from_local(
            track_position(track, static_cast<double>(last_ts)));
        fix.label = track.episodes.back().label;
        track.fixes.push_back(std::move(fix));
      }
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

std::size_t serving_cell(const World& world, const geo::LocalPoint& p,
                         double sigma, std::mt19937_64& rng) {
  if (world.cells.empty()) throw EmptyInput("world has no cells");
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < world.cells.size(); ++i) {
    const CellSite& cell = world.cells[i];
    double radius = cell.reach_radius_m;
    if (radius <= 0.0) {
      for (const auto& v : cell.hexagon) {
        radius = std::max(radius, geo::distance(cell.antenna, v));
      }
    }
    double score = -geo::distance(p, cell.antenna) / radius;
    if (sigma > 0.0) score += sigma * noise(rng);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

CdrSample sample_cdr(const SimConfig& config, const World& world,
                     std::span<const TruthTrack> tracks) {
  validate_config(config);
  CdrSample sample;
  if (config.event_rate_per_hour <= 0.0) return sample;
  const double rate_per_s = config.event_rate_per_hour / 3600.0;

  for (std::size_t u = 0; u < tracks.size(); ++u) {
    const TruthTrack& track = tracks[u];
    if (track.episodes.empty()) continue;
    auto rng = substream(config.seed, "cdr", static_cast<std::uint64_t>(u));
    std::exponential_distribution<double> gap(rate_per_s);
    std::uniform_int_distribution<int> kind(0, 2);

    const double t_begin = track.episodes.front().t0;
    const double t_end = track.episodes.back().t1;
    double t = t_begin + gap(rng);
    while (t <= t_end) {
      auto ts = std::llround(t);
      geo::LocalPoint pos = track_position(track, static_cast<double>(ts));
      std::size_t cell =
          serving_cell(world, pos, config.selection_sigma, rng);

      ingest::CdrRecord rec;
      rec.imsi = track.user;
      rec.imei = fmt::format("imei-{:02}", u + 1);
      rec.cell_id = world.cells[cell].cell_id;
      rec.timestamp = ts;
      switch (kind(rng)) {
        case 0: rec.event = EventKind::kCall; break;
        case 1: rec.event = EventKind::kSms; break;
        default: rec.event = EventKind::kData; break;
      }
      sample.records.push_back(std::move(rec));

      coverage::RadiusObservation obs;
      obs.cell_id = world.cells[cell].cell_id;
      obs.location = world.anchor.from_local(pos);
      sample.observations.push_back(std::move(obs));

      t += gap(rng);
    }
  }
  return sample;
}

}  // namespace cdrloc::sim
