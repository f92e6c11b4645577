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

#include "cdrloc/pipeline.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "cdrloc/errors.hpp"
#include "cdrloc/eval.hpp"
#include "cdrloc/io.hpp"

namespace cdrloc::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double as_double(const std::string& key, const json& value) {
  if (!value.is_number()) {
    throw ConfigError(fmt::format("config key '{}' must be a number", key));
  }
  return value.get<double>();
}

std::int64_t as_int(const std::string& key, const json& value) {
  if (!value.is_number_integer()) {
    throw ConfigError(fmt::format("config key '{}' must be an integer", key));
  }
  return value.get<std::int64_t>();
}

std::uint64_t as_uint(const std::string& key, const json& value) {
  if (!value.is_number_unsigned() && !value.is_number_integer()) {
    throw ConfigError(fmt::format("config key '{}' must be an integer", key));
  }
  return value.get<std::uint64_t>();
}

bool as_bool(const std::string& key, const json& value) {
  if (!value.is_boolean()) {
    throw ConfigError(fmt::format("config key '{}' must be a boolean", key));
  }
  return value.get<bool>();
}

std::string as_string(const std::string& key, const json& value) {
  if (!value.is_string()) {
    throw ConfigError(fmt::format("config key '{}' must be a string", key));
  }
  return value.get<std::string>();
}

void apply_key(PipelineConfig& config, const std::string& key,
               const json& value) {
  auto& p = config.paths;
  auto& s = config.sim;
  auto& c = config.calibration;
  auto& k = config.skf;
  auto& m = config.match;

  if (key == "paths.out_dir") p.out_dir = as_string(key, value);
  else if (key == "paths.cdr") p.cdr = as_string(key, value);
  else if (key == "paths.coverage") p.coverage = as_string(key, value);
  else if (key == "paths.roads") p.roads = as_string(key, value);
  else if (key == "paths.buildings") p.buildings = as_string(key, value);
  else if (key == "paths.truth") p.truth = as_string(key, value);
  else if (key == "paths.observations") p.observations = as_string(key, value);
  else if (key == "paths.extensions") p.extensions = as_string(key, value);
  else if (key == "paths.optimization_report")
    p.optimization_report = as_string(key, value);
  else if (key == "paths.estimates") p.estimates = as_string(key, value);
  else if (key == "paths.matched") p.matched = as_string(key, value);
  else if (key == "paths.estimates_opt") p.estimates_opt = as_string(key, value);
  else if (key == "paths.estimates_no_opt")
    p.estimates_no_opt = as_string(key, value);
  else if (key == "paths.matched_opt") p.matched_opt = as_string(key, value);
  else if (key == "paths.matched_no_opt")
    p.matched_no_opt = as_string(key, value);
  else if (key == "paths.report") p.report = as_string(key, value);
  else if (key == "paths.histogram") p.histogram = as_string(key, value);
  else if (key == "paths.histogram_columns")
    p.histogram_columns = as_string(key, value);
  else if (key == "sim.seed") s.seed = as_uint(key, value);
  else if (key == "sim.extent_km") s.extent_km = as_double(key, value);
  else if (key == "sim.n_cells") s.n_cells = static_cast<int>(as_int(key, value));
  else if (key == "sim.cell_pitch_m") s.cell_pitch_m = as_double(key, value);
  else if (key == "sim.n_users") s.n_users = static_cast<int>(as_int(key, value));
  else if (key == "sim.duration_s") s.duration_s = as_double(key, value);
  else if (key == "sim.stay_dwell_min_s")
    s.stay_dwell_min_s = as_double(key, value);
  else if (key == "sim.stay_dwell_max_s")
    s.stay_dwell_max_s = as_double(key, value);
  else if (key == "sim.move_leg_min_s") s.move_leg_min_s = as_double(key, value);
  else if (key == "sim.move_leg_max_s") s.move_leg_max_s = as_double(key, value);
  else if (key == "sim.move_speed_min") s.move_speed_min = as_double(key, value);
  else if (key == "sim.move_speed_max") s.move_speed_max = as_double(key, value);
  else if (key == "sim.event_rate_per_hour")
    s.event_rate_per_hour = as_double(key, value);
  else if (key == "sim.selection_sigma")
    s.selection_sigma = as_double(key, value);
  else if (key == "sim.reach_min") s.reach_min = as_double(key, value);
  else if (key == "sim.reach_max") s.reach_max = as_double(key, value);
  else if (key == "sim.road_spacing_m") s.road_spacing_m = as_double(key, value);
  else if (key == "sim.road_jitter_m") s.road_jitter_m = as_double(key, value);
  else if (key == "sim.dwell_offset_min_m")
    s.dwell_offset_min_m = as_double(key, value);
  else if (key == "sim.dwell_offset_max_m")
    s.dwell_offset_max_m = as_double(key, value);
  else if (key == "sim.truth_interval_s")
    s.truth_interval_s = as_double(key, value);
  else if (key == "sim.origin_lat") s.origin_lat = as_double(key, value);
  else if (key == "sim.origin_lon") s.origin_lon = as_double(key, value);
  else if (key == "sim.start_timestamp") s.start_timestamp = as_int(key, value);
  else if (key == "calibration.weight") c.weight = as_double(key, value);
  else if (key == "calibration.min_radius_m")
    c.min_radius_m = as_double(key, value);
  else if (key == "calibration.lbfgs.memory")
    c.lbfgs.memory = static_cast<int>(as_int(key, value));
  else if (key == "calibration.lbfgs.max_iterations")
    c.lbfgs.max_iterations = static_cast<int>(as_int(key, value));
  else if (key == "calibration.lbfgs.gradient_tolerance")
    c.lbfgs.gradient_tolerance = as_double(key, value);
  else if (key == "calibration.lbfgs.armijo_c1")
    c.lbfgs.armijo_c1 = as_double(key, value);
  else if (key == "calibration.lbfgs.backtrack_shrink")
    c.lbfgs.backtrack_shrink = as_double(key, value);
  else if (key == "calibration.lbfgs.max_line_search_steps")
    c.lbfgs.max_line_search_steps = static_cast<int>(as_int(key, value));
  else if (key == "azimuth_shift") config.azimuth_shift = as_double(key, value);
  else if (key == "skf.models") {
    if (!value.is_array() || value.empty()) {
      throw ConfigError("config key 'skf.models' must be a non-empty array");
    }
    k.models.clear();
    for (const auto& name : value) {
      std::string text = as_string(key, name);
      if (text == "MOVE") k.models.push_back(skf::MotionKind::kMove);
      else if (text == "STAY") k.models.push_back(skf::MotionKind::kStay);
      else
        throw ConfigError(fmt::format(
            "config key 'skf.models': unknown model '{}'", text));
    }
  } else if (key == "skf.self_transition")
    k.self_transition = as_double(key, value);
  else if (key == "skf.q_move") k.q_move = as_double(key, value);
  else if (key == "skf.q_stay") k.q_stay = as_double(key, value);
  else if (key == "skf.stay_velocity_var")
    k.stay_velocity_var = as_double(key, value);
  else if (key == "skf.v_max") k.v_max = as_double(key, value);
  else if (key == "skf.max_dt_s") k.max_dt_s = as_double(key, value);
  else if (key == "skf.fixed_measurement_noise")
    k.fixed_measurement_noise = as_bool(key, value);
  else if (key == "skf.fixed_measurement_std")
    k.fixed_measurement_std = as_double(key, value);
  else if (key == "skf.stay_threshold") k.stay_threshold = as_double(key, value);
  else if (key == "match.radius_m") m.radius_m = as_double(key, value);
  else if (key == "match.max_doublings")
    m.max_doublings = static_cast<int>(as_int(key, value));
  else if (key == "match.policy") {
    std::string text = as_string(key, value);
    if (text == "EXPAND") m.policy = mapmatch::ExpandPolicy::kExpand;
    else if (text == "STRICT") m.policy = mapmatch::ExpandPolicy::kStrict;
    else
      throw ConfigError(fmt::format(
          "config key 'match.policy': unknown policy '{}'", text));
  } else if (key == "match.segment_distance_query")
    m.segment_distance_query = as_bool(key, value);
  else if (key == "match.grid_cell_m") m.grid_cell_m = as_double(key, value);
  else if (key == "match.match_stay_buildings")
    m.match_stay_buildings = as_bool(key, value);
  else if (key == "eval.max_skew_s") config.eval_max_skew_s = as_double(key, value);
  else if (key == "eval.bin_width_m")
    config.eval_bin_width_m = as_double(key, value);
  else if (key == "jobs") config.jobs = static_cast<int>(as_int(key, value));
  else
    throw ConfigError(fmt::format("unknown config key '{}'", key));
}

void apply_tree(PipelineConfig& config, const std::string& prefix,
                const json& node) {
  if (node.is_object() && !(prefix == "skf.models")) {
    for (const auto& [name, child] : node.items()) {
      apply_tree(config, prefix.empty() ? name : prefix + "." + name, child);
    }
    return;
  }
  apply_key(config, prefix, node);
}

fs::path resolve(const Paths& paths, const std::string& name) {
  fs::path p(name);
  if (p.is_absolute()) return p;
  return fs::path(paths.out_dir) / p;
}

std::string read_text(const fs::path& path) {
  return io::read_file(path.string());
}

void write_text(const Paths& paths, const std::string& name,
                std::string_view content) {
  fs::path target = resolve(paths, name);
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path());
  }
  io::write_file(target.string(), content);
}

/// Maps exceptions to the process exit-code contract.
int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}

ingest::CoverageSet load_coverage(const PipelineConfig& config, bool no_opt) {
  std::istringstream in(read_text(resolve(config.paths, config.paths.coverage)));
  auto coverage = ingest::parse_coverage(in, config.azimuth_shift);
  if (!no_opt) {
    fs::path ext = resolve(config.paths, config.paths.extensions);
    if (fs::exists(ext)) {
      std::istringstream ext_in(read_text(ext));
      coverage::apply_extensions_csv(coverage, ext_in);
    }
  }
  return coverage;
}

std::vector<ingest::Trajectory> load_trajectories(
    const PipelineConfig& config, const ingest::CoverageSet& coverage) {
  std::istringstream in(read_text(resolve(config.paths, config.paths.cdr)));
  auto records = ingest::parse_cdr(in);
  int dropped = ingest::drop_unresolvable(records, coverage);
  if (dropped > 0) {
    fmt::print(stderr, "warning: dropped {} records with unknown cells\n",
               dropped);
  }
  return ingest::build_trajectories(records);
}

std::vector<geo::LocalPoint> load_building_centroids(
    const PipelineConfig& config, const geo::LocalProjection& projection) {
  std::vector<geo::LocalPoint> centroids;
  if (config.paths.buildings.empty()) return centroids;
  fs::path path = resolve(config.paths, config.paths.buildings);
  if (!fs::exists(path)) return centroids;

  json doc = json::parse(read_text(path));
  if (doc.value("type", "") != "FeatureCollection") {
    throw InvalidGeometry("buildings: not a FeatureCollection");
  }
  for (const auto& feature : doc["features"]) {
    const json& geom = feature["geometry"];
    if (geom.value("type", "") != "Polygon") continue;
    const json& ring = geom["coordinates"][0];
    double x = 0.0;
    double y = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {  // skip closing vertex
      geo::GeoPoint g{ring[i][1].get<double>(), ring[i][0].get<double>()};
      geo::LocalPoint p = projection.to_local(g);
      x += p.x;
      y += p.y;
      ++count;
    }
    if (count > 0) {
      centroids.push_back(geo::LocalPoint{x / count, y / count});
    }
  }
  return centroids;
}

std::vector<ingest::TruthFix> load_truth(const PipelineConfig& config) {
  std::istringstream in(read_text(resolve(config.paths, config.paths.truth)));
  return ingest::parse_truth(in);
}

void write_estimates(const PipelineConfig& config, const std::string& name,
                     const skf::EstimateResult& result) {
  write_text(config.paths, name, skf::estimates_to_csv(result.rows));
}

skf::EstimateResult run_estimate(const PipelineConfig& config,
                                 const RunFlags& flags, bool no_opt) {
  auto coverage = load_coverage(config, no_opt);
  auto trajectories = load_trajectories(config, coverage);
  int jobs = flags.jobs.value_or(config.jobs);
  return estimate_all(trajectories, coverage, config.skf, flags.filtered,
                      jobs);
}

std::vector<mapmatch::MatchRow> run_match(const PipelineConfig& config,
                                          const RunFlags& flags,
                                          const std::string& estimates_name) {
  // The coverage centroid fixes the shared local frame.
  auto coverage = load_coverage(config, true);
  std::istringstream roads_in(
      read_text(resolve(config.paths, config.paths.roads)));
  auto roads = ingest::parse_roads(roads_in, coverage.projection);
  if (roads.dropped_zero_length > 0) {
    fmt::print(stderr, "warning: dropped {} zero-length road segments\n",
               roads.dropped_zero_length);
  }
  mapmatch::RoadNetwork net(std::move(roads.segments),
                            config.match.grid_cell_m);

  std::istringstream est_in(
      read_text(resolve(config.paths, estimates_name)));
  auto estimates = skf::parse_estimates(est_in);

  mapmatch::MatchConfig match_config = config.match;
  if (flags.match_stay_buildings) match_config.match_stay_buildings = true;
  std::vector<geo::LocalPoint> centroids;
  if (match_config.match_stay_buildings) {
    centroids = load_building_centroids(config, coverage.projection);
  }
  return mapmatch::match_trajectory(estimates, net, coverage.projection,
                                    match_config, centroids);
}

eval::VariantErrors variant_errors(
    eval::Variant variant, const std::vector<eval::Sample>& samples,
    std::span<const ingest::TruthFix> truth, double max_skew) {
  auto pairing = eval::pair_truth(samples, truth, max_skew);
  eval::VariantErrors errors;
  errors.variant = variant;
  errors.stay_errors_m =
      eval::errors_for_label(pairing.pairs, EpisodeLabel::kStay);
  errors.move_errors_m =
      eval::errors_for_label(pairing.pairs, EpisodeLabel::kMove);
  return errors;
}

}  // namespace

PipelineConfig load_config(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
  PipelineConfig config;
  if (!config_path.empty()) {
    json doc;
    try {
      doc = json::parse(io::read_file(config_path));
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("config file {}: {}", config_path,
                                    e.what()));
    }
    if (!doc.is_object()) {
      throw ConfigError("config file must hold a JSON object");
    }
    for (const auto& [name, child] : doc.items()) {
      apply_tree(config, name, child);
    }
  }
  for (const auto& entry : overrides) {
    auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(fmt::format("--set needs key=value, got '{}'", entry));
    }
    std::string key = entry.substr(0, eq);
    std::string text = entry.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;  // bare strings stay strings
    }
    apply_key(config, key, value);
  }
  return config;
}

skf::EstimateResult estimate_all(const std::vector<ingest::Trajectory>& trajs,
                                 const ingest::CoverageSet& coverage,
                                 const skf::SkfParams& params,
                                 bool use_filtered, int jobs) {
  std::vector<skf::EstimateResult> per_user(trajs.size());
  jobs = std::max(1, jobs);
  if (jobs == 1 || trajs.size() <= 1) {
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      per_user[i] = skf::estimate_user(trajs[i], coverage, params,
                                       use_filtered);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> failures(trajs.size());
    auto count = static_cast<std::size_t>(jobs);
    for (std::size_t w = 0; w < std::min(count, trajs.size()); ++w) {
      workers.emplace_back([&]() {
        while (true) {
          std::size_t i = next.fetch_add(1);
          if (i >= trajs.size()) return;
          try {
            per_user[i] = skf::estimate_user(trajs[i], coverage, params,
                                             use_filtered);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& worker : workers) worker.join();
    for (auto& failure : failures) {
      if (failure) std::rethrow_exception(failure);
    }
  }

  // Deterministic merge in trajectory (user) order.
  skf::EstimateResult merged;
  for (auto& result : per_user) {
    merged.audit.merge(result.audit);
    merged.rows.insert(merged.rows.end(),
                       std::make_move_iterator(result.rows.begin()),
                       std::make_move_iterator(result.rows.end()));
  }
  return merged;
}

int cmd_simulate(PipelineConfig config, const RunFlags& flags) {
  return guarded([&]() {
    if (flags.seed) config.sim.seed = *flags.seed;
    sim::validate_config(config.sim);

    sim::World world = sim::generate_world(config.sim);
    auto tracks = sim::generate_truth(config.sim, world);
    auto sample = sim::sample_cdr(config.sim, world, tracks);

    write_text(config.paths, config.paths.coverage,
               sim::coverage_geojson(world));
    write_text(config.paths, config.paths.roads, sim::roads_geojson(world));
    std::vector<ingest::TruthFix> fixes;
    for (const auto& track : tracks) {
      fixes.insert(fixes.end(), track.fixes.begin(), track.fixes.end());
    }
    write_text(config.paths, config.paths.truth, ingest::to_csv(fixes));
    write_text(config.paths, config.paths.cdr,
               ingest::to_csv(sample.records));
    write_text(config.paths, config.paths.observations,
               coverage::observations_to_csv(sample.observations));
    fmt::print("simulated {} cells, {} users, {} records, {} truth fixes\n",
               world.cells.size(), tracks.size(), sample.records.size(),
               fixes.size());
  });
}

int cmd_optimize(PipelineConfig config, const RunFlags& flags) {
  return guarded([&]() {
    if (flags.seed) config.sim.seed = *flags.seed;
    std::istringstream cov_in(
        read_text(resolve(config.paths, config.paths.coverage)));
    auto coverage = ingest::parse_coverage(cov_in, config.azimuth_shift);

    coverage::CalibrationResult report;
    fs::path obs_path = resolve(config.paths, config.paths.observations);
    if (!fs::exists(obs_path)) {
      fmt::print(stderr,
                 "warning: no observations file at {}; extensions stay 0\n",
                 obs_path.string());
      report.converged = true;
      report.covered_before = 1.0;
      report.covered_after = 1.0;
    } else {
      std::istringstream obs_in(read_text(obs_path));
      auto observations = coverage::parse_observations(obs_in);
      report = coverage::optimize_extensions(coverage, observations,
                                             config.calibration);
    }

    write_text(config.paths, config.paths.extensions,
               coverage::extensions_to_csv(coverage));
    json report_json{{"initial_objective", report.initial_objective},
                     {"final_objective", report.final_objective},
                     {"iterations", report.iterations},
                     {"converged", report.converged},
                     {"observations_used", report.observations_used},
                     {"observations_skipped", report.observations_skipped},
                     {"covered_before", report.covered_before},
                     {"covered_after", report.covered_after}};
    write_text(config.paths, config.paths.optimization_report,
               report_json.dump(2) + "\n");
    fmt::print("optimized {} cells: penalty {} -> {}, covered {:.3f} -> "
               "{:.3f}\n",
               coverage.cells.size(), report.initial_objective,
               report.final_objective, report.covered_before,
               report.covered_after);
  });
}

int cmd_estimate(PipelineConfig config, const RunFlags& flags) {
  return guarded([&]() {
    auto result = run_estimate(config, flags, flags.no_opt);
    write_estimates(config, config.paths.estimates, result);
    fmt::print("estimated {} rows\n", result.rows.size());
  });
}

int cmd_match(PipelineConfig config, const RunFlags& flags) {
  return guarded([&]() {
    auto rows = run_match(config, flags, config.paths.estimates);
    write_text(config.paths, config.paths.matched,
               mapmatch::matches_to_csv(rows));
    std::size_t matched = 0;
    for (const auto& row : rows) {
      if (row.status == mapmatch::MatchStatus::kMatched) ++matched;
    }
    fmt::print("matched {}/{} rows\n", matched, rows.size());
  });
}

int cmd_evaluate(PipelineConfig config, const RunFlags& flags) {
  return guarded([&]() {
    if (flags.jobs) config.jobs = *flags.jobs;
    auto truth = load_truth(config);

    auto load_estimate_samples = [&](const std::string& name) {
      fs::path path = resolve(config.paths, name);
      if (!fs::exists(path)) {
        throw MissingVariant(fmt::format("missing variant file {}",
                                         path.string()));
      }
      std::istringstream in(read_text(path));
      auto rows = skf::parse_estimates(in);
      return eval::to_samples(rows);
    };
    auto load_match_samples = [&](const std::string& name) {
      fs::path path = resolve(config.paths, name);
      if (!fs::exists(path)) {
        throw MissingVariant(fmt::format("missing variant file {}",
                                         path.string()));
      }
      std::istringstream in(read_text(path));
      auto rows = mapmatch::parse_matches(in);
      return eval::to_samples(rows);
    };

    auto opt_samples = load_estimate_samples(config.paths.estimates_opt);
    auto no_opt_samples = load_estimate_samples(config.paths.estimates_no_opt);
    auto opt_mm_samples = load_match_samples(config.paths.matched_opt);
    auto no_opt_mm_samples = load_match_samples(config.paths.matched_no_opt);

    std::vector<eval::VariantErrors> variants;
    variants.push_back(variant_errors(eval::Variant::kOpt, opt_samples, truth,
                                      config.eval_max_skew_s));
    variants.push_back(variant_errors(eval::Variant::kNoOpt, no_opt_samples,
                                      truth, config.eval_max_skew_s));
    variants.push_back(variant_errors(eval::Variant::kOptMm, opt_mm_samples,
                                      truth, config.eval_max_skew_s));
    variants.push_back(variant_errors(eval::Variant::kNoOptMm,
                                      no_opt_mm_samples, truth,
                                      config.eval_max_skew_s));

    auto pairing =
        eval::pair_truth(opt_samples, truth, config.eval_max_skew_s);
    eval::EvalReport report;
    report.accuracy = eval::episode_accuracy(pairing.pairs);
    report.paired = static_cast<int>(pairing.pairs.size());
    report.unpaired = pairing.unpaired;
    auto stay_errors =
        eval::errors_for_label(pairing.pairs, EpisodeLabel::kStay);
    auto move_errors =
        eval::errors_for_label(pairing.pairs, EpisodeLabel::kMove);
    report.stay_stats = eval::error_stats(stay_errors, config.eval_bin_width_m);
    report.move_stats = eval::error_stats(move_errors, config.eval_bin_width_m);
    report.table = eval::rmse_table(variants);

    write_text(config.paths, config.paths.report,
               eval::report_to_json(report));
    write_text(config.paths, config.paths.histogram,
               eval::histogram_csv(report));
    write_text(config.paths, config.paths.histogram_columns,
               eval::histogram_columns(report));
    fmt::print(
        "evaluated {} pairs: stay acc {}, move acc {}\n", report.paired,
        report.accuracy.stay_accuracy ? *report.accuracy.stay_accuracy : -1.0,
        report.accuracy.move_accuracy ? *report.accuracy.move_accuracy : -1.0);
  });
}

int cmd_run_all(PipelineConfig config, const RunFlags& flags) {
  if (flags.seed) config.sim.seed = *flags.seed;
  if (int code = cmd_simulate(config, flags); code != 0) return code;
  if (int code = cmd_optimize(config, flags); code != 0) return code;

  // Estimate and match both variants for the four-way comparison.
  int code = guarded([&]() {
    RunFlags opt_flags = flags;
    opt_flags.no_opt = false;
    write_estimates(config, config.paths.estimates_opt,
                    run_estimate(config, opt_flags, false));
    write_estimates(config, config.paths.estimates_no_opt,
                    run_estimate(config, opt_flags, true));
    write_text(config.paths, config.paths.matched_opt,
               mapmatch::matches_to_csv(
                   run_match(config, opt_flags, config.paths.estimates_opt)));
    write_text(config.paths, config.paths.matched_no_opt,
               mapmatch::matches_to_csv(run_match(
                   config, opt_flags, config.paths.estimates_no_opt)));
  });
  if (code != 0) return code;
  return cmd_evaluate(config, flags);
}

}  // namespace cdrloc::pipeline
