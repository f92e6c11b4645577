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

#ifndef CDRLOC_SKF_HPP_
#define CDRLOC_SKF_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdrloc/geo.hpp"
#include "cdrloc/ingest.hpp"
#include "cdrloc/types.hpp"

namespace cdrloc::skf {

// State layout: [x, y, vx, vy] in the local metric frame.
inline constexpr int kStateDim = 4;
inline constexpr int kObsDim = 2;

enum class MotionKind {
  kMove,  // constant velocity, white-acceleration noise
  kStay,  // static position, small positional diffusion
};

struct SkfParams {
  std::vector<MotionKind> models = {MotionKind::kMove, MotionKind::kStay};
  double self_transition = 0.8;
  double q_move = 0.5;            // acceleration spectral density, m^2/s^3
  double q_stay = 0.1;            // stay positional diffusion, m^2/s
  double stay_velocity_var = 1e-6;  // per-step velocity jitter in stay
  double v_max = 40.0;            // initial velocity std, m/s
  double max_dt_s = 21600.0;      // time gaps are capped here
  bool fixed_measurement_noise = false;
  double fixed_measurement_std = 1.2;
  double stay_threshold = 0.5;    // stay label when p_stay >= threshold
};

/// State transition over dt seconds; identity at dt = 0 for both kinds.
Eigen::Matrix4d transition_matrix(MotionKind kind, double dt);

/// Process noise over dt seconds. Move integrates white acceleration; stay
/// diffuses position and keeps a fixed tiny velocity jitter.
Eigen::Matrix4d process_noise(MotionKind kind, double dt,
                              const SkfParams& params);

/// Position-only measurement matrix (2x4).
Eigen::Matrix<double, 2, 4> measurement_matrix();

/// Measurement covariance for a serving cell: isotropic with std equal to
/// half the effective radius, or the fixed std when that mode is on.
Eigen::Matrix2d measurement_noise(const ingest::CellCoverage& cell,
                                  const SkfParams& params);

/// Model transition probabilities: self_transition on the diagonal, the
/// remaining mass split evenly across the other models. A single model
/// gives the 1x1 matrix [1].
Eigen::MatrixXd model_transition_matrix(const SkfParams& params);

struct Observation {
  std::int64_t timestamp = 0;
  std::string cell_id;
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  Eigen::Matrix2d noise = Eigen::Matrix2d::Identity();
};

/// Builds the observation sequence for one trajectory. Every event must
/// resolve in the coverage set (UnknownCell otherwise).
std::vector<Observation> make_observations(const ingest::Trajectory& traj,
                                           const ingest::CoverageSet& coverage,
                                           const SkfParams& params);

struct GaussianState {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
};

/// Belief after collapsing the per-step branch expansion back to one
/// Gaussian per model.
struct StepBelief {
  std::vector<GaussianState> per_model;
  Eigen::VectorXd model_prob;
  GaussianState combined;  // moment-matched mixture across models
};

/// Worst-case numerical health counters accumulated over a run.
struct NumericAudit {
  double max_cov_asymmetry = 0.0;   // before re-symmetrization
  double min_cov_eigenvalue = 0.0;  // most negative seen, 0 if none
  double max_prob_sum_error = 0.0;  // |sum - 1| before renormalization
  bool all_finite = true;

  void merge(const NumericAudit& other);
};

struct FilterRun {
  std::vector<StepBelief> filtered;
  double total_log_likelihood = 0.0;
  int clamped_gaps = 0;  // steps whose dt hit max_dt_s
  NumericAudit audit;
};

/// Second-order pseudo-Bayes filter: each step expands over (previous
/// model, next model) pairs, predicts and updates every branch, weights
/// branches by transition probability times measurement likelihood in log
/// space, then moment-matches back to one Gaussian per next model. The
/// first observation initializes the state directly: position at the
/// measurement, zero velocity, covariance diag(R, v_max^2 I), uniform
/// model probabilities.
FilterRun run_filter(std::span<const Observation> observations,
                     const SkfParams& params);

struct SmootherRun {
  std::vector<StepBelief> smoothed;
  NumericAudit audit;
};

/// Backward switching smoother: per (model now, model next) branch it
/// re-predicts, applies the Rauch-Tung-Striebel correction toward the
/// smoothed next-step branch, reweights switches by filtered probability
/// times transition probability, and collapses per current model.
SmootherRun run_smoother(std::span<const Observation> observations,
                         const FilterRun& filter_run, const SkfParams& params);

/// Probability that the current model is the stay kind.
double stay_probability(const StepBelief& belief, const SkfParams& params);

struct EstimateRow {
  std::string imsi;
  std::int64_t timestamp = 0;
  std::string cell_id;
  geo::GeoPoint position;
  double p_stay_filtered = 0.0;
  double p_stay_smoothed = 0.0;
  EpisodeLabel label = EpisodeLabel::kStay;
};

struct EstimateResult {
  std::vector<EstimateRow> rows;
  NumericAudit audit;
};

/// Filters and smooths one user's trajectory. Positions come from the
/// smoothed combined mean unless use_filtered is set; the label is stay
/// when the matching stay probability reaches 0.5.
EstimateResult estimate_user(const ingest::Trajectory& traj,
                             const ingest::CoverageSet& coverage,
                             const SkfParams& params, bool use_filtered);

/// Serializes `imsi,timestamp,cell_id,lat,lon,p_stay_filtered,
/// p_stay_smoothed,label` CSV.
std::string estimates_to_csv(std::span<const EstimateRow> rows);

/// Parses the estimates CSV back.
std::vector<EstimateRow> parse_estimates(std::istream& in);

}  // namespace cdrloc::skf

#endif  // CDRLOC_SKF_HPP_
