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

#include "cdrloc/skf.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdrloc/errors.hpp"
#include "cdrloc/geo.hpp"
#include "cdrloc/ingest.hpp"

namespace cdrloc::skf {
namespace {

ingest::CoverageSet make_set(
    const std::vector<std::tuple<std::string, double, double, double>>& specs) {
  ingest::CoverageSet set;
  set.projection = geo::LocalProjection(geo::GeoPoint{58.0, 26.0});
  for (const auto& [id, cx, cy, radius] : specs) {
    ingest::CellCoverage cell;
    cell.cell_id = id;
    cell.circle_center = geo::LocalPoint{cx, cy};
    cell.base_radius_m = radius;
    cell.antenna = set.projection.from_local(cell.circle_center);
    set.index_by_id[id] = set.cells.size();
    set.cells.push_back(std::move(cell));
  }
  return set;
}

Observation make_obs(std::int64_t t, double x, double y, double std_m) {
  Observation obs;
  obs.timestamp = t;
  obs.z = Eigen::Vector2d(x, y);
  obs.noise = std_m * std_m * Eigen::Matrix2d::Identity();
  return obs;
}

TEST(TransitionMatrix, MoveIntegratesVelocityStayIsIdentity) {
  Eigen::Matrix4d move = transition_matrix(MotionKind::kMove, 10.0);
  Eigen::Vector4d state(0.0, 0.0, 1.0, 0.0);
  Eigen::Vector4d next = move * state;
  EXPECT_DOUBLE_EQ(next(0), 10.0);
  EXPECT_DOUBLE_EQ(next(1), 0.0);
  EXPECT_DOUBLE_EQ(next(2), 1.0);
  EXPECT_DOUBLE_EQ(next(3), 0.0);

  EXPECT_TRUE(transition_matrix(MotionKind::kMove, 0.0)
                  .isApprox(Eigen::Matrix4d::Identity()));
  EXPECT_TRUE(transition_matrix(MotionKind::kStay, 123.0)
                  .isApprox(Eigen::Matrix4d::Identity()));
}

TEST(ProcessNoise, WhiteAccelerationBlocksForMove) {
  SkfParams params;
  params.q_move = 0.5;
  double dt = 2.0;
  Eigen::Matrix4d q = process_noise(MotionKind::kMove, dt, params);
  // Per-axis [dt^3/3, dt^2/2; dt^2/2, dt] scaled by the spectral density.
  EXPECT_NEAR(q(0, 0), 0.5 * 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(q(0, 2), 0.5 * 2.0, 1e-12);
  EXPECT_NEAR(q(2, 0), 0.5 * 2.0, 1e-12);
  EXPECT_NEAR(q(2, 2), 0.5 * 2.0, 1e-12);
  EXPECT_NEAR(q(1, 1), q(0, 0), 1e-12);
  EXPECT_NEAR(q(1, 3), q(0, 2), 1e-12);
  EXPECT_DOUBLE_EQ(q(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(q(0, 3), 0.0);
}

TEST(ProcessNoise, StayDiffusesPositionOnly) {
  SkfParams params;
  params.q_stay = 0.1;
  params.stay_velocity_var = 1e-6;
  Eigen::Matrix4d q = process_noise(MotionKind::kStay, 2.0, params);
  EXPECT_NEAR(q(0, 0), 0.2, 1e-12);
  EXPECT_NEAR(q(1, 1), 0.2, 1e-12);
  EXPECT_NEAR(q(2, 2), 1e-6, 1e-18);
  EXPECT_NEAR(q(3, 3), 1e-6, 1e-18);
  EXPECT_DOUBLE_EQ(q(0, 2), 0.0);
}

TEST(MeasurementNoise, HalfEffectiveRadiusOrFixed) {
  ingest::CellCoverage cell;
  cell.base_radius_m = 1500.0;
  cell.extension_m = 500.0;
  SkfParams params;
  Eigen::Matrix2d r = measurement_noise(cell, params);
  EXPECT_NEAR(r(0, 0), 1e6, 1e-6);  // std = 2000 / 2
  EXPECT_NEAR(r(1, 1), 1e6, 1e-6);
  EXPECT_DOUBLE_EQ(r(0, 1), 0.0);

  params.fixed_measurement_noise = true;
  params.fixed_measurement_std = 1.2;
  Eigen::Matrix2d fixed = measurement_noise(cell, params);
  EXPECT_NEAR(fixed(0, 0), 1.44, 1e-12);
  EXPECT_NEAR(fixed(1, 1), 1.44, 1e-12);
}

TEST(ModelTransitionMatrix, SelfMassOnDiagonalRestSplitEvenly) {
  SkfParams params;
  Eigen::MatrixXd two = model_transition_matrix(params);
  ASSERT_EQ(two.rows(), 2);
  EXPECT_NEAR(two(0, 0), 0.8, 1e-12);
  EXPECT_NEAR(two(0, 1), 0.2, 1e-12);
  EXPECT_NEAR(two(1, 0), 0.2, 1e-12);
  EXPECT_NEAR(two(1, 1), 0.8, 1e-12);

  params.models = {MotionKind::kMove};
  Eigen::MatrixXd one = model_transition_matrix(params);
  ASSERT_EQ(one.rows(), 1);
  EXPECT_DOUBLE_EQ(one(0, 0), 1.0);

  params.models = {MotionKind::kMove, MotionKind::kStay, MotionKind::kStay};
  Eigen::MatrixXd three = model_transition_matrix(params);
  ASSERT_EQ(three.rows(), 3);
  EXPECT_NEAR(three(1, 1), 0.8, 1e-12);
  EXPECT_NEAR(three(1, 0), 0.1, 1e-12);
  EXPECT_NEAR(three(1, 2), 0.1, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(three.row(i).sum(), 1.0, 1e-12);
}

TEST(RunFilter, ScalarHandOracleSingleStayModel) {
  // Stay dynamics with q_stay * dt = 12 and measurement var 4 reduce each
  // axis to a scalar filter: prior var 16, gain 16/20, posterior 0.8 z.
  SkfParams params;
  params.models = {MotionKind::kStay};
  params.q_stay = 12.0;
  params.fixed_measurement_noise = true;
  params.fixed_measurement_std = 2.0;

  std::vector<Observation> obs{make_obs(0, 0.0, 0.0, 2.0),
                               make_obs(1, 1.0, 0.0, 2.0)};
  FilterRun run = run_filter(obs, params);
  ASSERT_EQ(run.filtered.size(), 2u);
  const auto& last = run.filtered[1].combined;
  EXPECT_NEAR(last.mean(0), 0.8, 1e-9);
  EXPECT_NEAR(last.mean(1), 0.0, 1e-9);
  EXPECT_NEAR(last.cov(0, 0), 3.2, 1e-9);
  EXPECT_NEAR(run.filtered[0].combined.mean(0), 0.0, 1e-12);
  EXPECT_NEAR(run.filtered[0].combined.cov(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(run.filtered[0].combined.cov(2, 2),
              params.v_max * params.v_max, 1e-9);
}

// Plain Kalman filter and RTS smoother over the same motion model, written
// directly from the textbook recursions.
struct ClassicRun {
  std::vector<Eigen::Vector4d> fm, sm;
  std::vector<Eigen::Matrix4d> fc, sc;
};

ClassicRun classic_kf_rts(const std::vector<Observation>& obs,
                          const SkfParams& params, MotionKind kind) {
  std::size_t n = obs.size();
  ClassicRun out;
  out.fm.resize(n);
  out.fc.resize(n);
  Eigen::Matrix<double, 2, 4> h = measurement_matrix();
  auto symmetrize = [](Eigen::Matrix4d& cov) {
    cov = 0.5 * (cov + cov.transpose()).eval();
  };

  std::vector<Eigen::Vector4d> pred_m(n);
  std::vector<Eigen::Matrix4d> pred_c(n);

  out.fm[0] = Eigen::Vector4d::Zero();
  out.fm[0].head<2>() = obs[0].z;
  out.fc[0] = Eigen::Matrix4d::Zero();
  out.fc[0](0, 0) = obs[0].noise(0, 0);
  out.fc[0](1, 1) = obs[0].noise(1, 1);
  out.fc[0](2, 2) = params.v_max * params.v_max;
  out.fc[0](3, 3) = params.v_max * params.v_max;
  pred_m[0] = out.fm[0];
  pred_c[0] = out.fc[0];

  std::vector<Eigen::Matrix4d> fs(n, Eigen::Matrix4d::Identity());
  for (std::size_t k = 1; k < n; ++k) {
    double dt = std::min(
        static_cast<double>(obs[k].timestamp - obs[k - 1].timestamp),
        params.max_dt_s);
    Eigen::Matrix4d f = transition_matrix(kind, dt);
    Eigen::Matrix4d q = process_noise(kind, dt, params);
    fs[k] = f;
    pred_m[k] = f * out.fm[k - 1];
    pred_c[k] = f * out.fc[k - 1] * f.transpose() + q;

    Eigen::Vector2d innovation = obs[k].z - h * pred_m[k];
    Eigen::Matrix2d s = h * pred_c[k] * h.transpose() + obs[k].noise;
    Eigen::LLT<Eigen::Matrix2d> llt(s);
    Eigen::Matrix<double, 4, 2> gain =
        pred_c[k] * h.transpose() * llt.solve(Eigen::Matrix2d::Identity());
    out.fm[k] = pred_m[k] + gain * innovation;
    // Joseph-form update, kept symmetric like any careful implementation.
    Eigen::Matrix4d a = Eigen::Matrix4d::Identity() - gain * h;
    out.fc[k] = a * pred_c[k] * a.transpose() +
                gain * obs[k].noise * gain.transpose();
    symmetrize(out.fc[k]);
  }

  out.sm = out.fm;
  out.sc = out.fc;
  for (std::size_t k = n - 1; k-- > 0;) {
    // Recompute the one-step prediction from the symmetrized filtered
    // state so the correction sees consistent inputs.
    double dt = std::min(
        static_cast<double>(obs[k + 1].timestamp - obs[k].timestamp),
        params.max_dt_s);
    Eigen::Matrix4d f = transition_matrix(kind, dt);
    Eigen::Matrix4d q = process_noise(kind, dt, params);
    Eigen::Vector4d x_pred = f * out.fm[k];
    Eigen::Matrix4d p_pred = f * out.fc[k] * f.transpose() + q;
    Eigen::LDLT<Eigen::Matrix4d> ldlt(p_pred);
    Eigen::Matrix4d gain = ldlt.solve(f * out.fc[k]).transpose();
    out.sm[k] = out.fm[k] + gain * (out.sm[k + 1] - x_pred);
    out.sc[k] = out.fc[k] +
                gain * (out.sc[k + 1] - p_pred) * gain.transpose();
    symmetrize(out.sc[k]);
  }
  return out;
}

TEST(SingleModel, MatchesClassicKfAndRtsTrajectories) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-2000.0, 2000.0);
  std::uniform_real_distribution<double> stddev(10.0, 100.0);
  std::uniform_int_distribution<int> gap(1, 60);

  for (int trial = 0; trial < 10; ++trial) {
    MotionKind kind = trial % 2 == 0 ? MotionKind::kMove : MotionKind::kStay;
    SkfParams params;
    params.models = {kind};

    std::vector<Observation> obs;
    std::int64_t t = 1600000000;
    for (int k = 0; k < 20; ++k) {
      t += gap(rng);
      obs.push_back(make_obs(t, coord(rng), coord(rng), stddev(rng)));
    }

    FilterRun filter = run_filter(obs, params);
    SmootherRun smoother = run_smoother(obs, filter, params);
    ClassicRun classic = classic_kf_rts(obs, params, kind);

    for (std::size_t k = 0; k < obs.size(); ++k) {
      EXPECT_LT((filter.filtered[k].combined.mean - classic.fm[k])
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9)
          << "filter mean, trial " << trial << " step " << k;
      EXPECT_LT((filter.filtered[k].combined.cov - classic.fc[k])
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9)
          << "filter cov, trial " << trial << " step " << k;
      EXPECT_LT((smoother.smoothed[k].combined.mean - classic.sm[k])
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9)
          << "smoother mean, trial " << trial << " step " << k;
      EXPECT_LT((smoother.smoothed[k].combined.cov - classic.sc[k])
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9)
          << "smoother cov, trial " << trial << " step " << k;
      EXPECT_NEAR(filter.filtered[k].model_prob(0), 1.0, 1e-12);
      EXPECT_NEAR(smoother.smoothed[k].model_prob(0), 1.0, 1e-12);
    }
  }
}

TEST(RunFilter, IdenticalModelsKeepUniformProbability) {
  // Two copies of the same dynamics are indistinguishable, so the model
  // posterior must stay at one half no matter the data.
  SkfParams params;
  params.models = {MotionKind::kMove, MotionKind::kMove};

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-500.0, 500.0);
  std::vector<Observation> obs;
  for (int k = 0; k < 15; ++k) {
    obs.push_back(make_obs(1600000000 + 30 * k, coord(rng), coord(rng), 50.0));
  }
  FilterRun filter = run_filter(obs, params);
  SmootherRun smoother = run_smoother(obs, filter, params);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    EXPECT_NEAR(filter.filtered[k].model_prob(0), 0.5, 1e-9);
    EXPECT_NEAR(smoother.smoothed[k].model_prob(0), 0.5, 1e-9);
  }
}

TEST(RunFilter, CountsClampedGaps) {
  SkfParams params;
  std::vector<Observation> obs{
      make_obs(1600000000, 0.0, 0.0, 100.0),
      make_obs(1600000000 + 40000, 50.0, 0.0, 100.0),  // beyond the cap
      make_obs(1600000000 + 40060, 60.0, 0.0, 100.0),
  };
  FilterRun run = run_filter(obs, params);
  EXPECT_EQ(run.clamped_gaps, 1);
  EXPECT_TRUE(run.audit.all_finite);
}

TEST(StayProbability, SumsMassOfStayModels) {
  SkfParams params;  // {kMove, kStay}
  StepBelief belief;
  belief.per_model.resize(2);
  belief.model_prob = Eigen::VectorXd(2);
  belief.model_prob << 0.3, 0.7;
  EXPECT_NEAR(stay_probability(belief, params), 0.7, 1e-12);

  SkfParams move_only;
  move_only.models = {MotionKind::kMove};
  StepBelief single;
  single.per_model.resize(1);
  single.model_prob = Eigen::VectorXd::Ones(1);
  EXPECT_DOUBLE_EQ(stay_probability(single, move_only), 0.0);
}

TEST(MakeObservations, MapsCellsToCentersAndNoise) {
  auto set = make_set({{"a", 100.0, -50.0, 800.0}});
  ingest::Trajectory traj;
  traj.user = "u";
  traj.events = {{1600000000, "a"}, {1600000600, "a"}};
  SkfParams params;
  auto obs = make_observations(traj, set, params);
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_NEAR(obs[0].z(0), 100.0, 1e-9);
  EXPECT_NEAR(obs[0].z(1), -50.0, 1e-9);
  EXPECT_NEAR(obs[0].noise(0, 0), 400.0 * 400.0, 1e-9);

  traj.events.push_back({1600001200, "ghost"});
  EXPECT_THROW(make_observations(traj, set, params), UnknownCell);
}

TEST(EstimateUser, StationarySequenceLabelsStay) {
  auto set = make_set({{"a", 0.0, 0.0, 500.0}});
  ingest::Trajectory traj;
  traj.user = "u";
  for (int k = 0; k < 20; ++k) traj.events.push_back({1600000000 + 600 * k, "a"});

  SkfParams params;
  auto result = estimate_user(traj, set, params, false);
  ASSERT_EQ(result.rows.size(), 20u);
  for (const auto& row : result.rows) {
    EXPECT_EQ(row.label, EpisodeLabel::kStay);
    EXPECT_GE(row.p_stay_smoothed, 0.5);
  }
  EXPECT_GT(result.rows[10].p_stay_smoothed, 0.9);
  EXPECT_TRUE(result.audit.all_finite);
}

TEST(EstimateUser, SteadyTraverseLabelsMove) {
  // One event per cell along a straight line at 10 m/s.
  std::vector<std::tuple<std::string, double, double, double>> specs;
  for (int i = 0; i < 10; ++i) {
    specs.emplace_back("c" + std::to_string(i), 2000.0 * i, 0.0, 500.0);
  }
  auto set = make_set(specs);
  ingest::Trajectory traj;
  traj.user = "u";
  for (int i = 0; i < 10; ++i) {
    traj.events.push_back({1600000000 + 200 * i, "c" + std::to_string(i)});
  }
  SkfParams params;
  auto result = estimate_user(traj, set, params, false);
  ASSERT_EQ(result.rows.size(), 10u);
  for (std::size_t k = 2; k + 2 < result.rows.size(); ++k) {
    EXPECT_EQ(result.rows[k].label, EpisodeLabel::kMove) << "row " << k;
    EXPECT_LT(result.rows[k].p_stay_smoothed, 0.5);
  }
}

TEST(EstimateUser, AuditStaysWithinNumericalHygieneBounds) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cell(0, 3);
  std::uniform_int_distribution<int> gap(30, 4000);
  auto set = make_set({{"c0", 0.0, 0.0, 400.0},
                       {"c1", 3000.0, 500.0, 900.0},
                       {"c2", -2000.0, 2500.0, 600.0},
                       {"c3", 800.0, -4000.0, 1500.0}});
  ingest::Trajectory traj;
  traj.user = "u";
  std::int64_t t = 1600000000;
  for (int k = 0; k < 60; ++k) {
    t += gap(rng);
    traj.events.push_back({t, "c" + std::to_string(cell(rng))});
  }
  SkfParams params;
  auto result = estimate_user(traj, set, params, false);
  EXPECT_TRUE(result.audit.all_finite);
  EXPECT_LE(result.audit.max_cov_asymmetry, 1e-9);
  EXPECT_GE(result.audit.min_cov_eigenvalue, -1e-9);
  EXPECT_LE(result.audit.max_prob_sum_error, 1e-9);
}

TEST(EstimatesCsv, RoundTripsIncludingSubnormalProbabilities) {
  std::vector<EstimateRow> rows(2);
  rows[0] = {"user-1", 1600000100, "cell-a", geo::GeoPoint{58.4, 26.7},
             0.25, 3.20862274649637e-309, EpisodeLabel::kMove};
  rows[1] = {"user-1", 1600000200, "cell-b", geo::GeoPoint{58.5, 26.8},
             0.75, 0.9999999999, EpisodeLabel::kStay};

  std::string csv = estimates_to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "imsi,timestamp,cell_id,lat,lon,p_stay_filtered,"
            "p_stay_smoothed,label");
  std::istringstream in(csv);
  auto parsed = parse_estimates(in);
  ASSERT_EQ(parsed.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(parsed[i].imsi, rows[i].imsi);
    EXPECT_EQ(parsed[i].timestamp, rows[i].timestamp);
    EXPECT_EQ(parsed[i].cell_id, rows[i].cell_id);
    EXPECT_DOUBLE_EQ(parsed[i].position.lat, rows[i].position.lat);
    EXPECT_DOUBLE_EQ(parsed[i].position.lon, rows[i].position.lon);
    EXPECT_DOUBLE_EQ(parsed[i].p_stay_filtered, rows[i].p_stay_filtered);
    EXPECT_DOUBLE_EQ(parsed[i].p_stay_smoothed, rows[i].p_stay_smoothed);
    EXPECT_EQ(parsed[i].label, rows[i].label);
  }
}

}  // namespace
}  // namespace cdrloc::skf
