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

#ifndef CDRLOC_COVERAGE_HPP_
#define CDRLOC_COVERAGE_HPP_

#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdrloc/geo.hpp"
#include "cdrloc/ingest.hpp"

namespace cdrloc::coverage {

struct Circle {
  geo::LocalPoint center;
  double radius_m = 0.0;
};

/// Circle covering every polygon vertex. For a directional antenna the
/// center is pushed from the site along the azimuth bearing (compass
/// degrees, 0 = north) by shift_factor times the farthest vertex distance;
/// an omnidirectional site keeps the center on the antenna.
Circle enclosing_circle(const geo::LocalPoint& antenna,
                        std::optional<double> azimuth_deg,
                        std::span<const geo::LocalPoint> polygon,
                        double shift_factor);

/// Computes circle_center / base_radius_m for every cell in the set.
void attach_circles(ingest::CoverageSet& coverage, double azimuth_shift);

/// A ground-truth position observed while a given cell was serving.
struct RadiusObservation {
  std::string cell_id;
  geo::GeoPoint location;
};

/// Parses `cell_id,lat,lon` CSV.
std::vector<RadiusObservation> parse_observations(std::istream& in);

std::string observations_to_csv(std::span<const RadiusObservation> rows);

/// Radius calibration posed as an unconstrained minimization over the
/// per-cell extension vector p. An observation outside its serving circle
/// contributes a weighted squared shortfall; the quadratic term on p keeps
/// extensions small. Every observation's cell must resolve (UnknownCell).
class PenaltyProblem {
 public:
  PenaltyProblem(const ingest::CoverageSet& coverage,
                 std::span<const RadiusObservation> observations,
                 double weight);

  std::size_t dimension() const { return base_radius_.size(); }
  double weight() const { return weight_; }

  double objective(std::span<const double> p) const;
  void gradient(std::span<const double> p, std::span<double> grad) const;

  /// Fraction of observations inside their cell's effective circle at p.
  double covered_fraction(std::span<const double> p) const;

  /// Distance from each observation to its serving circle's center, in
  /// input order.
  std::span<const double> observation_distances() const {
    return observation_distance_;
  }

 private:
  std::vector<double> base_radius_;
  std::vector<std::size_t> observation_cell_;
  std::vector<double> observation_distance_;
  double weight_;
};

struct LbfgsOptions {
  int memory = 8;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // relative to max(1, |f|)
  double armijo_c1 = 1e-4;
  double backtrack_shrink = 0.5;
  int max_line_search_steps = 50;
};

struct LbfgsResult {
  std::vector<double> x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with Armijo backtracking. The callable evaluates the
/// objective and writes the gradient. Pairs with non-positive curvature are
/// skipped rather than damped.
LbfgsResult lbfgs_minimize(
    const std::function<double(std::span<const double>, std::span<double>)>&
        objective_and_gradient,
    std::vector<double> x0, const LbfgsOptions& options = {});

struct CalibrationOptions {
  double weight = 10.0;
  double min_radius_m = 1.0;  // floor applied to base + extension
  LbfgsOptions lbfgs;
};

struct CalibrationResult {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool converged = false;
  int observations_used = 0;
  int observations_skipped = 0;  // unknown cell_id, filtered before the fit
  double covered_before = 0.0;   // fraction inside effective circles
  double covered_after = 0.0;
};

/// Learns extension_m for every cell from observations, starting at zero
/// extensions. After the fit, any cell whose effective radius would fall
/// below min_radius_m is floored.
CalibrationResult optimize_extensions(
    ingest::CoverageSet& coverage,
    std::span<const RadiusObservation> observations,
    const CalibrationOptions& options = {});

/// Serializes `cell_id,base_radius_m,extension_m` CSV.
std::string extensions_to_csv(const ingest::CoverageSet& coverage);

/// Loads extensions from CSV into matching cells. Unknown cell ids throw
/// UnknownCell; cells absent from the file keep their current extension.
void apply_extensions_csv(ingest::CoverageSet& coverage, std::istream& in);

}  // namespace cdrloc::coverage

#endif  // CDRLOC_COVERAGE_HPP_
