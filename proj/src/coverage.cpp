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

#include "cdrloc/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include <fmt/format.h>

#include "cdrloc/errors.hpp"
#include "cdrloc/io.hpp"

namespace cdrloc::coverage {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void ensure_finite(double f, std::span<const double> grad) {
  if (!std::isfinite(f)) {
    throw NonFiniteEncountered("objective is not finite");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw NonFiniteEncountered("gradient is not finite");
    }
  }
}

}  // namespace

Circle enclosing_circle(const geo::LocalPoint& antenna,
                        std::optional<double> azimuth_deg,
                        std::span<const geo::LocalPoint> polygon,
                        double shift_factor) {
  if (polygon.size() < 3) {
    throw DegeneratePolygon(
        fmt::format("polygon has {} vertices", polygon.size()));
  }

  Circle circle;
  circle.center = antenna;
  if (azimuth_deg.has_value()) {
    double d_max = 0.0;
    for (const auto& v : polygon) {
      d_max = std::max(d_max, geo::distance(antenna, v));
    }
    // Compass bearing: 0 deg = north (+y), 90 deg = east (+x).
    double theta = geo::deg2rad(*azimuth_deg);
    circle.center.x += shift_factor * d_max * std::sin(theta);
    circle.center.y += shift_factor * d_max * std::cos(theta);
  }
  for (const auto& v : polygon) {
    circle.radius_m = std::max(circle.radius_m, geo::distance(circle.center, v));
  }
  return circle;
}

void attach_circles(ingest::CoverageSet& coverage, double azimuth_shift) {
  for (auto& cell : coverage.cells) {
    std::vector<geo::LocalPoint> local_polygon;
    local_polygon.reserve(cell.polygon.size());
    for (const auto& v : cell.polygon) {
      local_polygon.push_back(coverage.projection.to_local(v));
    }
    Circle circle =
        enclosing_circle(coverage.projection.to_local(cell.antenna),
                         cell.azimuth_deg, local_polygon, azimuth_shift);
    cell.circle_center = circle.center;
    cell.base_radius_m = circle.radius_m;
  }
}

std::vector<RadiusObservation> parse_observations(std::istream& in) {
  std::vector<RadiusObservation> observations;
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput("missing header row");
  if (io::strip_cr(line) != "cell_id,lat,lon") {
    throw MalformedRow(1, fmt::format("expected header 'cell_id,lat,lon', "
                                      "got '{}'",
                                      io::strip_cr(line)));
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = io::strip_cr(line);
    if (body.empty()) continue;
    auto fields = io::split_csv_line(body);
    if (fields.size() != 3) {
      throw MalformedRow(line_no,
                         fmt::format("expected 3 fields, got {}", fields.size()));
    }
    RadiusObservation obs;
    obs.cell_id = fields[0];
    try {
      obs.location.lat = io::parse_double(fields[1]);
      obs.location.lon = io::parse_double(fields[2]);
    } catch (const std::exception&) {
      throw MalformedRow(line_no, "non-numeric coordinate");
    }
    if (!obs.location.is_valid()) {
      throw MalformedRow(line_no, "coordinates out of range");
    }
    observations.push_back(std::move(obs));
  }
  return observations;
}

std::string observations_to_csv(std::span<const RadiusObservation> rows) {
  std::string out = "cell_id,lat,lon\n";
  for (const auto& obs : rows) {
    out += fmt::format("{},{},{}\n", obs.cell_id,
                       io::format_double(obs.location.lat),
                       io::format_double(obs.location.lon));
  }
  return out;
}

PenaltyProblem::PenaltyProblem(const ingest::CoverageSet& coverage,
                               std::span<const RadiusObservation> observations,
                               double weight)
    : weight_(weight) {
  base_radius_.reserve(coverage.cells.size());
  for (const auto& cell : coverage.cells) {
    base_radius_.push_back(cell.base_radius_m);
  }
  observation_cell_.reserve(observations.size());
  observation_distance_.reserve(observations.size());
  for (const auto& obs : observations) {
    auto it = coverage.index_by_id.find(obs.cell_id);
    if (it == coverage.index_by_id.end()) {
      throw UnknownCell("observation references unknown cell: " + obs.cell_id);
    }
    observation_cell_.push_back(it->second);
    observation_distance_.push_back(
        geo::distance(coverage.cells[it->second].circle_center,
                      coverage.projection.to_local(obs.location)));
  }
}

double PenaltyProblem::objective(std::span<const double> p) const {
  double f = 0.0;
  for (double pi : p) f += pi * pi;
  for (std::size_t j = 0; j < observation_cell_.size(); ++j) {
    double d = base_radius_[observation_cell_[j]] + p[observation_cell_[j]] -
               observation_distance_[j];
    if (d < 0.0) f += weight_ * d * d;
  }
  return f;
}

void PenaltyProblem::gradient(std::span<const double> p,
                              std::span<double> grad) const {
  for (std::size_t i = 0; i < p.size(); ++i) grad[i] = 2.0 * p[i];
  for (std::size_t j = 0; j < observation_cell_.size(); ++j) {
    std::size_t i = observation_cell_[j];
    double d = base_radius_[i] + p[i] - observation_distance_[j];
    if (d < 0.0) grad[i] += 2.0 * weight_ * d;
  }
}

double PenaltyProblem::covered_fraction(std::span<const double> p) const {
  if (observation_cell_.empty()) return 1.0;
  std::size_t covered = 0;
  for (std::size_t j = 0; j < observation_cell_.size(); ++j) {
    std::size_t i = observation_cell_[j];
    if (observation_distance_[j] <= base_radius_[i] + p[i]) ++covered;
  }
  return static_cast<double>(covered) /
         static_cast<double>(observation_cell_.size());
}

LbfgsResult lbfgs_minimize(
    const std::function<double(std::span<const double>, std::span<double>)>&
        objective_and_gradient,
    std::vector<double> x0, const LbfgsOptions& options) {
  const std::size_t n = x0.size();
  LbfgsResult result;
  result.x = std::move(x0);

  std::vector<double> grad(n, 0.0);
  double f = objective_and_gradient(result.x, grad);
  ensure_finite(f, grad);

  struct Pair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
  };
  std::deque<Pair> history;

  std::vector<double> direction(n), x_new(n), grad_new(n, 0.0), alpha_buf;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double gnorm = norm2(grad);
    if (gnorm < options.gradient_tolerance * std::max(1.0, std::abs(f))) {
      result.converged = true;
      break;
    }

    // Two-loop recursion for the quasi-Newton direction.
    std::copy(grad.begin(), grad.end(), direction.begin());
    alpha_buf.assign(history.size(), 0.0);
    for (std::size_t h = history.size(); h-- > 0;) {
      const Pair& pair = history[h];
      alpha_buf[h] = pair.rho * dot(pair.s, direction);
      for (std::size_t i = 0; i < n; ++i) {
        direction[i] -= alpha_buf[h] * pair.y[i];
      }
    }
    if (!history.empty()) {
      const Pair& last = history.back();
      double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& d : direction) d *= gamma;
    }
    for (std::size_t h = 0; h < history.size(); ++h) {
      const Pair& pair = history[h];
      double beta = pair.rho * dot(pair.y, direction);
      for (std::size_t i = 0; i < n; ++i) {
        direction[i] += pair.s[i] * (alpha_buf[h] - beta);
      }
    }
    for (double& d : direction) d = -d;

    double slope = dot(grad, direction);
    if (slope >= 0.0) {
      // Not a descent direction; fall back to steepest descent.
      for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i];
      slope = -gnorm * gnorm;
      history.clear();
    }

    double step = history.empty() ? std::min(1.0, 1.0 / std::max(1.0, gnorm))
                                  : 1.0;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < options.max_line_search_steps; ++ls) {
      for (std::size_t i = 0; i < n; ++i) {
        x_new[i] = result.x[i] + step * direction[i];
      }
      f_new = objective_and_gradient(x_new, grad_new);
      ensure_finite(f_new, grad_new);
      if (f_new <= f + options.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= options.backtrack_shrink;
    }
    if (!accepted) break;

    Pair pair;
    pair.s.resize(n);
    pair.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = x_new[i] - result.x[i];
      pair.y[i] = grad_new[i] - grad[i];
    }
    double sy = dot(pair.s, pair.y);
    // Non-positive curvature pairs would break the inverse-Hessian model.
    if (sy > 1e-10 * norm2(pair.s) * norm2(pair.y)) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (history.size() > static_cast<std::size_t>(options.memory)) {
        history.pop_front();
      }
    }

    result.x.swap(x_new);
    grad.swap(grad_new);
    f = f_new;
    result.iterations = iter + 1;
  }

  if (!result.converged) {
    double gnorm = norm2(grad);
    result.converged =
        gnorm < options.gradient_tolerance * std::max(1.0, std::abs(f));
  }
  result.objective = f;
  return result;
}

CalibrationResult optimize_extensions(
    ingest::CoverageSet& coverage,
    std::span<const RadiusObservation> observations,
    const CalibrationOptions& options) {
  if (coverage.cells.empty()) throw EmptyInput("no cells to calibrate");

  CalibrationResult report;
  std::vector<RadiusObservation> usable;
  usable.reserve(observations.size());
  for (const auto& obs : observations) {
    if (coverage.index_by_id.contains(obs.cell_id)) {
      usable.push_back(obs);
    } else {
      ++report.observations_skipped;
    }
  }
  report.observations_used = static_cast<int>(usable.size());

  PenaltyProblem problem(coverage, usable, options.weight);
  std::vector<double> p0(problem.dimension(), 0.0);
  report.initial_objective = problem.objective(p0);
  report.covered_before = problem.covered_fraction(p0);

  std::vector<double> p_final;
  if (usable.empty()) {
    p_final = std::move(p0);
    report.final_objective = report.initial_objective;
    report.converged = true;
  } else {
    auto fit = lbfgs_minimize(
        [&problem](std::span<const double> p, std::span<double> g) {
          problem.gradient(p, g);
          return problem.objective(p);
        },
        std::move(p0), options.lbfgs);
    p_final = std::move(fit.x);
    report.final_objective = fit.objective;
    report.iterations = fit.iterations;
    report.converged = fit.converged;
  }
  report.covered_after = problem.covered_fraction(p_final);

  for (std::size_t i = 0; i < coverage.cells.size(); ++i) {
    auto& cell = coverage.cells[i];
    cell.extension_m = p_final[i];
    if (cell.base_radius_m + cell.extension_m < options.min_radius_m) {
      cell.extension_m = options.min_radius_m - cell.base_radius_m;
    }
  }
  return report;
}

std::string extensions_to_csv(const ingest::CoverageSet& coverage) {
  std::string out = "cell_id,base_radius_m,extension_m\n";
  for (const auto& cell : coverage.cells) {
    out += fmt::format("{},{},{}\n", cell.cell_id,
                       io::format_double(cell.base_radius_m),
                       io::format_double(cell.extension_m));
  }
  return out;
}

void apply_extensions_csv(ingest::CoverageSet& coverage, std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput("missing header row");
  if (io::strip_cr(line) != "cell_id,base_radius_m,extension_m") {
    throw MalformedRow(
        1, fmt::format("expected header 'cell_id,base_radius_m,extension_m', "
                       "got '{}'",
                       io::strip_cr(line)));
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = io::strip_cr(line);
    if (body.empty()) continue;
    auto fields = io::split_csv_line(body);
    if (fields.size() != 3) {
      throw MalformedRow(line_no,
                         fmt::format("expected 3 fields, got {}", fields.size()));
    }
    auto it = coverage.index_by_id.find(fields[0]);
    if (it == coverage.index_by_id.end()) {
      throw UnknownCell("extensions file references unknown cell: " + fields[0]);
    }
    try {
      coverage.cells[it->second].extension_m = io::parse_double(fields[2]);
    } catch (const std::exception&) {
      throw MalformedRow(line_no, "non-numeric extension");
    }
  }
}

}  // namespace cdrloc::coverage
