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

#ifndef CDRLOC_PIPELINE_HPP_
#define CDRLOC_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdrloc/coverage.hpp"
#include "cdrloc/mapmatch.hpp"
#include "cdrloc/sim.hpp"
#include "cdrloc/skf.hpp"

namespace cdrloc::pipeline {

/// File locations; relative names resolve under out_dir.
struct Paths {
  std::string out_dir = "out";
  std::string cdr = "cdr.csv";
  std::string coverage = "coverage.geojson";
  std::string roads = "roads.geojson";
  std::string buildings;  // optional, empty means none
  std::string truth = "truth.csv";
  std::string observations = "observations.csv";
  std::string extensions = "extensions.csv";
  std::string optimization_report = "optimization_report.json";
  std::string estimates = "estimates.csv";
  std::string matched = "matched.csv";
  // Variant files the four-way comparison reads (run-all writes them).
  std::string estimates_opt = "estimates_opt.csv";
  std::string estimates_no_opt = "estimates_no_opt.csv";
  std::string matched_opt = "matched_opt.csv";
  std::string matched_no_opt = "matched_no_opt.csv";
  std::string report = "report.json";
  std::string histogram = "histogram.csv";
  std::string histogram_columns = "histogram.dat";
};

struct PipelineConfig {
  Paths paths;
  sim::SimConfig sim;
  coverage::CalibrationOptions calibration;
  double azimuth_shift = 0.5;
  skf::SkfParams skf;
  mapmatch::MatchConfig match;
  double eval_max_skew_s = 60.0;
  double eval_bin_width_m = 500.0;
  int jobs = 1;
};

/// Loads JSON config (missing file with empty path means all defaults),
/// then applies dotted key=value overrides (e.g. "sim.seed=7"). Unknown
/// keys or unparsable values throw ConfigError naming the key path.
PipelineConfig load_config(const std::string& config_path,
                           const std::vector<std::string>& overrides);

struct RunFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool no_opt = false;
  bool filtered = false;
  bool match_stay_buildings = false;
};

// Each command reads/writes the files named in config.paths and returns a
// process exit code: 0 success, 1 runtime failure, 2 config error.
int cmd_simulate(PipelineConfig config, const RunFlags& flags);
int cmd_optimize(PipelineConfig config, const RunFlags& flags);
int cmd_estimate(PipelineConfig config, const RunFlags& flags);
int cmd_match(PipelineConfig config, const RunFlags& flags);
int cmd_evaluate(PipelineConfig config, const RunFlags& flags);

/// simulate -> optimize -> estimate -> match -> evaluate, producing all
/// four comparison variants (extensions on/off, matching on/off).
int cmd_run_all(PipelineConfig config, const RunFlags& flags);

/// Estimates every trajectory, fanning users out over up to `jobs` worker
/// threads; results merge in user order regardless of scheduling.
skf::EstimateResult estimate_all(const std::vector<ingest::Trajectory>& trajs,
                                 const ingest::CoverageSet& coverage,
                                 const skf::SkfParams& params,
                                 bool use_filtered, int jobs);

}  // namespace cdrloc::pipeline

#endif  // CDRLOC_PIPELINE_HPP_
