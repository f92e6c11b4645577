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

#include "cdrloc/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string_view>
#include <unordered_set>
#include <utility>

#include <fmt/format.h>
#include <json.hpp>

#include "cdrloc/coverage.hpp"
#include "cdrloc/errors.hpp"
#include "cdrloc/io.hpp"

namespace cdrloc::ingest {
namespace {

using nlohmann::json;

double parse_double_field(std::string_view text, int line_no,
                          std::string_view what) {
  try {
    return io::parse_double(std::string(text));
  } catch (const std::invalid_argument&) {
    throw MalformedRow(line_no,
                       fmt::format("non-numeric {}: '{}'", what, text));
  }
}

std::int64_t parse_int_field(std::string_view text, int line_no,
                             std::string_view what) {
  std::int64_t value = 0;
  auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw MalformedRow(line_no,
                       fmt::format("non-numeric {}: '{}'", what, text));
  }
  return value;
}

geo::GeoPoint parse_geo_field(std::string_view lat_text,
                              std::string_view lon_text, int line_no) {
  geo::GeoPoint p{parse_double_field(lat_text, line_no, "lat"),
                  parse_double_field(lon_text, line_no, "lon")};
  if (!p.is_valid()) {
    throw MalformedRow(line_no, fmt::format("coordinates out of range: {},{}",
                                            lat_text, lon_text));
  }
  return p;
}

/// Reads lines, handing each non-empty data line to the callback with its
/// 1-based line number. Validates the exact header.
template <typename Fn>
void for_each_csv_row(std::istream& in, std::string_view expected_header,
                      Fn&& fn) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput("missing header row");
  if (io::strip_cr(line) != expected_header) {
    throw MalformedRow(
        1, fmt::format("expected header '{}', got '{}'", expected_header,
                       io::strip_cr(line)));
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = io::strip_cr(line);
    if (body.empty()) continue;
    fn(body, line_no);
  }
}

const json& require_property(const json& props, const char* key,
                             const std::string& where) {
  auto it = props.find(key);
  if (it == props.end()) {
    throw MissingProperty(fmt::format("{}: missing property '{}'", where, key));
  }
  return *it;
}

geo::GeoPoint coordinate_pair(const json& pair, const std::string& where) {
  if (!pair.is_array() || pair.size() < 2 || !pair[0].is_number() ||
      !pair[1].is_number()) {
    throw InvalidGeometry(where + ": coordinate is not a [lon, lat] pair");
  }
  // GeoJSON order is lon,lat.
  geo::GeoPoint p{pair[1].get<double>(), pair[0].get<double>()};
  if (!p.is_valid()) {
    throw InvalidGeometry(where + ": coordinate out of range");
  }
  return p;
}

json parse_feature_collection(std::istream& in, const char* what) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(fmt::format("{}: not valid JSON: {}", what, e.what()));
  }
  if (doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array()) {
    throw InvalidGeometry(fmt::format("{}: not a FeatureCollection", what));
  }
  return doc;
}

}  // namespace

std::vector<CdrRecord> parse_cdr(std::istream& in) {
  std::vector<CdrRecord> records;
  for_each_csv_row(
      in, "imsi,imei,cell_id,timestamp,event",
      [&records](std::string_view body, int line_no) {
        auto fields = io::split_csv_line(body);
        if (fields.size() != 5) {
          throw MalformedRow(
              line_no, fmt::format("expected 5 fields, got {}", fields.size()));
        }
        CdrRecord rec;
        rec.imsi = fields[0];
        rec.imei = fields[1];
        rec.cell_id = fields[2];
        rec.timestamp = parse_int_field(fields[3], line_no, "timestamp");
        if (rec.timestamp <= 0) {
          throw MalformedRow(line_no, "timestamp must be positive");
        }
        rec.event = parse_event_kind(fields[4]);
        if (rec.imsi.empty() || rec.cell_id.empty()) {
          throw MalformedRow(line_no, "empty imsi or cell_id");
        }
        records.push_back(std::move(rec));
      });
  return records;
}

CoverageSet parse_coverage(std::istream& in, double azimuth_shift) {
  json doc = parse_feature_collection(in, "coverage");

  CoverageSet set;
  for (const auto& feature : doc["features"]) {
    std::string where =
        fmt::format("coverage feature {}", set.cells.size());
    if (!feature.contains("geometry") || feature["geometry"].is_null()) {
      throw InvalidGeometry(where + ": missing geometry");
    }
    const json& geom = feature["geometry"];
    if (geom.value("type", "") != "Polygon") {
      throw InvalidGeometry(where + ": geometry must be a Polygon");
    }
    const json props =
        feature.contains("properties") && feature["properties"].is_object()
            ? feature["properties"]
            : json::object();

    CellCoverage cell;
    const json& id_prop = require_property(props, "cell_id", where);
    cell.cell_id = id_prop.is_string()
                       ? id_prop.get<std::string>()
                       : id_prop.dump();
    where = fmt::format("coverage feature '{}'", cell.cell_id);

    cell.antenna.lat =
        require_property(props, "antenna_lat", where).get<double>();
    cell.antenna.lon =
        require_property(props, "antenna_lon", where).get<double>();
    if (!cell.antenna.is_valid()) {
      throw InvalidGeometry(where + ": antenna out of range");
    }
    if (auto it = props.find("azimuth");
        it != props.end() && !it->is_null()) {
      double az = std::fmod(it->get<double>(), 360.0);
      if (az < 0) az += 360.0;
      cell.azimuth_deg = az;
    }

    const json& rings = geom["coordinates"];
    if (!rings.is_array() || rings.empty() || !rings[0].is_array()) {
      throw InvalidPolygon(where + ": missing outer ring");
    }
    for (const auto& vertex : rings[0]) {
      cell.polygon.push_back(coordinate_pair(vertex, where));
    }
    // GeoJSON rings repeat the first vertex at the end.
    if (cell.polygon.size() >= 2 &&
        cell.polygon.front().lat == cell.polygon.back().lat &&
        cell.polygon.front().lon == cell.polygon.back().lon) {
      cell.polygon.pop_back();
    }
    if (cell.polygon.size() < 3) {
      throw InvalidPolygon(where + ": fewer than 3 distinct vertices");
    }

    if (set.index_by_id.contains(cell.cell_id)) {
      throw DuplicateCellId("duplicate cell_id: " + cell.cell_id);
    }
    set.index_by_id.emplace(cell.cell_id, set.cells.size());
    set.cells.push_back(std::move(cell));
  }

  if (!set.cells.empty()) {
    double lat_sum = 0.0;
    double lon_sum = 0.0;
    for (const auto& cell : set.cells) {
      lat_sum += cell.antenna.lat;
      lon_sum += cell.antenna.lon;
    }
    const auto n = static_cast<double>(set.cells.size());
    set.projection =
        geo::LocalProjection(geo::GeoPoint{lat_sum / n, lon_sum / n});
  }
  coverage::attach_circles(set, azimuth_shift);
  return set;
}

RoadData parse_roads(std::istream& in, const geo::LocalProjection& projection) {
  json doc = parse_feature_collection(in, "roads");

  RoadData roads;
  std::size_t feature_index = 0;
  for (const auto& feature : doc["features"]) {
    std::string where = fmt::format("road feature {}", feature_index++);
    if (!feature.contains("geometry") || feature["geometry"].is_null()) {
      throw InvalidGeometry(where + ": missing geometry");
    }
    const json& geom = feature["geometry"];
    if (geom.value("type", "") != "LineString") {
      throw InvalidGeometry(where + ": geometry must be a LineString");
    }
    const json& coords = geom["coordinates"];
    if (!coords.is_array() || coords.size() < 2) {
      throw InvalidGeometry(where + ": LineString needs >= 2 coordinates");
    }
    std::vector<geo::LocalPoint> points;
    points.reserve(coords.size());
    for (const auto& vertex : coords) {
      points.push_back(projection.to_local(coordinate_pair(vertex, where)));
    }
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      if (points[i].x == points[i + 1].x && points[i].y == points[i + 1].y) {
        ++roads.dropped_zero_length;
        continue;
      }
      roads.segments.push_back(geo::Segment{points[i], points[i + 1]});
    }
  }
  return roads;
}

std::vector<TruthFix> parse_truth(std::istream& in) {
  std::vector<TruthFix> fixes;
  for_each_csv_row(
      in, "imsi,timestamp,lat,lon,label",
      [&fixes](std::string_view body, int line_no) {
        auto fields = io::split_csv_line(body);
        if (fields.size() != 5) {
          throw MalformedRow(
              line_no, fmt::format("expected 5 fields, got {}", fields.size()));
        }
        TruthFix fix;
        fix.user = fields[0];
        fix.timestamp = parse_int_field(fields[1], line_no, "timestamp");
        fix.location = parse_geo_field(fields[2], fields[3], line_no);
        try {
          fix.label = parse_episode_label(fields[4]);
        } catch (const ConfigError& e) {
          throw MalformedRow(line_no, e.what());
        }
        if (fix.user.empty()) throw MalformedRow(line_no, "empty imsi");
        fixes.push_back(std::move(fix));
      });
  return fixes;
}

std::vector<Trajectory> build_trajectories(std::span<const CdrRecord> records) {
  std::vector<std::string> users;
  std::unordered_map<std::string, std::size_t> user_index;
  std::vector<std::vector<const CdrRecord*>> grouped;
  for (const auto& rec : records) {
    auto [it, inserted] = user_index.emplace(rec.imsi, users.size());
    if (inserted) {
      users.push_back(rec.imsi);
      grouped.emplace_back();
    }
    grouped[it->second].push_back(&rec);
  }

  std::vector<std::size_t> order(users.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&users](std::size_t a, std::size_t b) {
              return users[a] < users[b];
            });

  std::vector<Trajectory> trajectories;
  trajectories.reserve(users.size());
  for (std::size_t idx : order) {
    Trajectory traj;
    traj.user = users[idx];
    auto& group = grouped[idx];
    // Stable: same-timestamp events of different cells keep input order.
    std::stable_sort(group.begin(), group.end(),
                     [](const CdrRecord* a, const CdrRecord* b) {
                       return a->timestamp < b->timestamp;
                     });
    std::unordered_set<std::string> seen;
    for (const CdrRecord* rec : group) {
      std::string key = fmt::format("{}#{}", rec->timestamp, rec->cell_id);
      if (!seen.insert(std::move(key)).second) continue;
      traj.events.push_back(TrajectoryEvent{rec->timestamp, rec->cell_id});
    }
    trajectories.push_back(std::move(traj));
  }
  return trajectories;
}

int drop_unresolvable(std::vector<CdrRecord>& records,
                      const CoverageSet& coverage) {
  auto removed = std::remove_if(
      records.begin(), records.end(), [&coverage](const CdrRecord& rec) {
        return coverage.find(rec.cell_id) == nullptr;
      });
  int dropped = static_cast<int>(records.end() - removed);
  records.erase(removed, records.end());
  return dropped;
}

std::string to_csv(std::span<const CdrRecord> records) {
  std::string out = "imsi,imei,cell_id,timestamp,event\n";
  for (const auto& rec : records) {
    out += fmt::format("{},{},{},{},{}\n", rec.imsi, rec.imei, rec.cell_id,
                       rec.timestamp, to_string(rec.event));
  }
  return out;
}

std::string to_csv(std::span<const TruthFix> fixes) {
  std::string out = "imsi,timestamp,lat,lon,label\n";
  for (const auto& fix : fixes) {
    out += fmt::format("{},{},{},{},{}\n", fix.user, fix.timestamp,
                       io::format_double(fix.location.lat),
                       io::format_double(fix.location.lon),
                       to_string(fix.label));
  }
  return out;
}

}  // namespace cdrloc::ingest
