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

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cdrloc/errors.hpp"
#include "cdrloc/pipeline.hpp"

namespace {

using cdrloc::pipeline::PipelineConfig;
using cdrloc::pipeline::RunFlags;

struct CliState {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool no_opt = false;
  bool filtered = false;
  bool match_stay_buildings = false;
};

void add_common_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "JSON config file");
  cmd->add_option("--set", state.overrides,
                  "Override a config value as key.path=value (repeatable)");
}

RunFlags to_flags(const CliState& state) {
  RunFlags flags;
  flags.seed = state.seed;
  flags.jobs = state.jobs;
  flags.no_opt = state.no_opt;
  flags.filtered = state.filtered;
  flags.match_stay_buildings = state.match_stay_buildings;
  return flags;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse trajectory refinement toolkit"};
  app.require_subcommand(1);

  CliState state;
  int (*runner)(PipelineConfig, const RunFlags&) = nullptr;

  CLI::App* simulate =
      app.add_subcommand("simulate", "Generate a synthetic world and events");
  add_common_options(simulate, state);
  simulate->add_option("--seed", state.seed, "Simulation seed");
  simulate->callback([&]() { runner = cdrloc::pipeline::cmd_simulate; });

  CLI::App* optimize = app.add_subcommand(
      "optimize", "Calibrate coverage radii against location observations");
  add_common_options(optimize, state);
  optimize->callback([&]() { runner = cdrloc::pipeline::cmd_optimize; });

  CLI::App* estimate = app.add_subcommand(
      "estimate", "Filter and smooth event trajectories into positions");
  add_common_options(estimate, state);
  estimate->add_option("--jobs", state.jobs, "Worker threads across users");
  estimate->add_flag("--no-opt", state.no_opt,
                     "Ignore calibrated radius extensions");
  estimate->add_flag("--filtered", state.filtered,
                     "Emit filtered instead of smoothed positions");
  estimate->callback([&]() { runner = cdrloc::pipeline::cmd_estimate; });

  CLI::App* match = app.add_subcommand(
      "match", "Snap movement estimates onto the road network");
  add_common_options(match, state);
  match->add_flag("--match-stay-buildings", state.match_stay_buildings,
                  "Snap stationary estimates to building centroids");
  match->callback([&]() { runner = cdrloc::pipeline::cmd_match; });

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Score estimates against ground truth");
  add_common_options(evaluate, state);
  evaluate->callback([&]() { runner = cdrloc::pipeline::cmd_evaluate; });

  CLI::App* run_all = app.add_subcommand(
      "run-all", "Simulate, calibrate, estimate, match, and evaluate");
  add_common_options(run_all, state);
  run_all->add_option("--seed", state.seed, "Simulation seed");
  run_all->add_option("--jobs", state.jobs, "Worker threads across users");
  run_all->add_flag("--match-stay-buildings", state.match_stay_buildings,
                    "Snap stationary estimates to building centroids");
  run_all->callback([&]() { runner = cdrloc::pipeline::cmd_run_all; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems share the config exit code
  }

  PipelineConfig config;
  try {
    config = cdrloc::pipeline::load_config(state.config_path, state.overrides);
  } catch (const cdrloc::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  }
  return runner(std::move(config), to_flags(state));
}
