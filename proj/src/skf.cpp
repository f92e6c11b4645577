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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "cdrloc/errors.hpp"
#include "cdrloc/io.hpp"

namespace cdrloc::skf {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double logsumexp(const Eigen::MatrixXd& logw) {
  double m = logw.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((logw.array() - m).exp().sum());
}

/// Records asymmetry and eigenvalue health, then forces exact symmetry.
void audit_and_symmetrize(Eigen::Matrix4d& cov, NumericAudit& audit) {
  if (!cov.allFinite()) {
    audit.all_finite = false;
    return;
  }
  double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  audit.max_cov_asymmetry = std::max(audit.max_cov_asymmetry, asym);
  cov = 0.5 * (cov + cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov,
                                                    Eigen::EigenvaluesOnly);
  double min_eig = es.eigenvalues().minCoeff();
  audit.min_cov_eigenvalue =
      std::min(audit.min_cov_eigenvalue, std::min(0.0, min_eig));
}

void audit_probabilities(Eigen::VectorXd& prob, NumericAudit& audit) {
  double sum = prob.sum();
  if (!std::isfinite(sum) || sum <= 0.0) {
    audit.all_finite = false;
    return;
  }
  audit.max_prob_sum_error =
      std::max(audit.max_prob_sum_error, std::abs(sum - 1.0));
  prob /= sum;
}

GaussianState collapse_mixture(std::span<const GaussianState> components,
                               const Eigen::VectorXd& weights) {
  GaussianState out;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    out.mean += weights[i] * components[i].mean;
  }
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    Eigen::Vector4d d = components[i].mean - out.mean;
    out.cov += weights[i] * (components[i].cov + d * d.transpose());
  }
  return out;
}

void require_models(const SkfParams& params) {
  if (params.models.empty()) {
    throw ConfigError("model bank must hold at least one model");
  }
}

}  // namespace

void NumericAudit::merge(const NumericAudit& other) {
  max_cov_asymmetry = std::max(max_cov_asymmetry, other.max_cov_asymmetry);
  min_cov_eigenvalue = std::min(min_cov_eigenvalue, other.min_cov_eigenvalue);
  max_prob_sum_error = std::max(max_prob_sum_error, other.max_prob_sum_error);
  all_finite = all_finite && other.all_finite;
}

Eigen::Matrix4d transition_matrix(MotionKind kind, double dt) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  if (kind == MotionKind::kMove) {
    f(0, 2) = dt;
    f(1, 3) = dt;
  }
  return f;
}

Eigen::Matrix4d process_noise(MotionKind kind, double dt,
                              const SkfParams& params) {
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  if (kind == MotionKind::kMove) {
    double q3 = params.q_move * dt * dt * dt / 3.0;
    double q2 = params.q_move * dt * dt / 2.0;
    double q1 = params.q_move * dt;
    q(0, 0) = q3;
    q(1, 1) = q3;
    q(0, 2) = q2;
    q(2, 0) = q2;
    q(1, 3) = q2;
    q(3, 1) = q2;
    q(2, 2) = q1;
    q(3, 3) = q1;
  } else {
    q(0, 0) = params.q_stay * dt;
    q(1, 1) = params.q_stay * dt;
    q(2, 2) = params.stay_velocity_var;
    q(3, 3) = params.stay_velocity_var;
  }
  return q;
}

Eigen::Matrix<double, 2, 4> measurement_matrix() {
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  return h;
}

Eigen::Matrix2d measurement_noise(const ingest::CellCoverage& cell,
                                  const SkfParams& params) {
  double std_m = params.fixed_measurement_noise
                     ? params.fixed_measurement_std
                     : cell.effective_radius_m() / 2.0;
  return (std_m * std_m) * Eigen::Matrix2d::Identity();
}

Eigen::MatrixXd model_transition_matrix(const SkfParams& params) {
  require_models(params);
  const auto n = static_cast<Eigen::Index>(params.models.size());
  if (n == 1) return Eigen::MatrixXd::Ones(1, 1);
  double off = (1.0 - params.self_transition) / static_cast<double>(n - 1);
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(n, n, off);
  t.diagonal().setConstant(params.self_transition);
  return t;
}

std::vector<Observation> make_observations(const ingest::Trajectory& traj,
                                           const ingest::CoverageSet& coverage,
                                           const SkfParams& params) {
  std::vector<Observation> observations;
  observations.reserve(traj.events.size());
  for (const auto& event : traj.events) {
    const ingest::CellCoverage* cell = coverage.find(event.cell_id);
    if (cell == nullptr) {
      throw UnknownCell("trajectory references unknown cell: " +
                        event.cell_id);
    }
    Observation obs;
    obs.timestamp = event.timestamp;
    obs.cell_id = event.cell_id;
    obs.z = Eigen::Vector2d(cell->circle_center.x, cell->circle_center.y);
    obs.noise = measurement_noise(*cell, params);
    observations.push_back(std::move(obs));
  }
  return observations;
}

FilterRun run_filter(std::span<const Observation> observations,
                     const SkfParams& params) {
  require_models(params);
  FilterRun run;
  if (observations.empty()) return run;

  const auto n = static_cast<Eigen::Index>(params.models.size());
  const Eigen::MatrixXd t_z = model_transition_matrix(params);
  const Eigen::MatrixXd log_t = t_z.array().log().matrix();
  const Eigen::Matrix<double, 2, 4> h = measurement_matrix();

  // First observation seeds the state directly.
  StepBelief init;
  GaussianState seed;
  seed.mean << observations[0].z(0), observations[0].z(1), 0.0, 0.0;
  seed.cov = Eigen::Matrix4d::Zero();
  seed.cov(0, 0) = observations[0].noise(0, 0);
  seed.cov(1, 1) = observations[0].noise(1, 1);
  seed.cov(2, 2) = params.v_max * params.v_max;
  seed.cov(3, 3) = params.v_max * params.v_max;
  init.per_model.assign(n, seed);
  init.model_prob = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  init.combined = seed;
  run.filtered.push_back(std::move(init));

  std::vector<GaussianState> branch(static_cast<std::size_t>(n * n));
  Eigen::MatrixXd log_w(n, n);  // (prev j, next k)

  for (std::size_t t = 1; t < observations.size(); ++t) {
    const StepBelief& prev = run.filtered.back();
    double dt =
        static_cast<double>(observations[t].timestamp -
                            observations[t - 1].timestamp);
    if (dt < 0.0) {
      throw NonFiniteState(
          fmt::format("observations out of order at index {}", t));
    }
    if (dt > params.max_dt_s) {
      dt = params.max_dt_s;
      ++run.clamped_gaps;
    }

    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::Matrix4d f = transition_matrix(params.models[k], dt);
      Eigen::Matrix4d q = process_noise(params.models[k], dt, params);
      for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Vector4d x_pred;
        Eigen::Matrix4d p_pred;
        if (dt > 0.0) {
          x_pred = f * prev.per_model[j].mean;
          p_pred = f * prev.per_model[j].cov * f.transpose() + q;
        } else {
          // Same-timestamp event: update only.
          x_pred = prev.per_model[j].mean;
          p_pred = prev.per_model[j].cov;
        }

        Eigen::Matrix2d s =
            h * p_pred * h.transpose() + observations[t].noise;
        Eigen::LLT<Eigen::Matrix2d> llt(s);
        if (llt.info() != Eigen::Success) {
          throw SingularInnovation(
              fmt::format("innovation covariance not PD at index {}", t));
        }
        Eigen::Vector2d innovation = observations[t].z - h * x_pred;
        Eigen::Matrix<double, 4, 2> gain =
            p_pred * h.transpose() * llt.solve(Eigen::Matrix2d::Identity());

        GaussianState& upd = branch[static_cast<std::size_t>(j * n + k)];
        upd.mean = x_pred + gain * innovation;
        Eigen::Matrix4d a = Eigen::Matrix4d::Identity() - gain * h;
        // Joseph form keeps the update PSD.
        upd.cov = a * p_pred * a.transpose() +
                  gain * observations[t].noise * gain.transpose();

        const Eigen::Matrix2d& l = llt.matrixLLT();
        double log_det = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)));
        double maha = innovation.dot(llt.solve(innovation));
        double log_lik = -0.5 * (2.0 * kLog2Pi + log_det + maha);
        double log_prior = prev.model_prob[j] > 0.0
                               ? std::log(prev.model_prob[j])
                               : kNegInf;
        log_w(j, k) = log_prior + log_t(j, k) + log_lik;
      }
    }

    double lse = logsumexp(log_w);
    if (lse == kNegInf || !std::isfinite(lse)) {
      throw NonFiniteState(
          fmt::format("all branch weights vanished at index {}", t));
    }
    run.total_log_likelihood += lse;
    Eigen::MatrixXd w = (log_w.array() - lse).exp().matrix();
    {
      double sum = w.sum();
      run.audit.max_prob_sum_error =
          std::max(run.audit.max_prob_sum_error, std::abs(sum - 1.0));
      w /= sum;
    }

    StepBelief belief;
    belief.per_model.resize(n);
    belief.model_prob = w.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::VectorXd mix(n);
      if (belief.model_prob[k] > 0.0) {
        for (Eigen::Index j = 0; j < n; ++j) {
          mix[j] = w(j, k) / belief.model_prob[k];
        }
      } else {
        // Likelihood underflow: fall back to the transition prior.
        for (Eigen::Index j = 0; j < n; ++j) {
          mix[j] = prev.model_prob[j] * t_z(j, k);
        }
        double s = mix.sum();
        mix = s > 0.0 ? (mix / s).eval()
                      : Eigen::VectorXd::Constant(n, 1.0 / n).eval();
      }
      std::vector<GaussianState> column(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        column[j] = branch[static_cast<std::size_t>(j * n + k)];
      }
      belief.per_model[k] = collapse_mixture(column, mix);
      audit_and_symmetrize(belief.per_model[k].cov, run.audit);
      if (!belief.per_model[k].mean.allFinite()) run.audit.all_finite = false;
    }
    audit_probabilities(belief.model_prob, run.audit);
    belief.combined = collapse_mixture(belief.per_model, belief.model_prob);
    audit_and_symmetrize(belief.combined.cov, run.audit);
    run.filtered.push_back(std::move(belief));
  }

  if (!run.audit.all_finite) {
    throw NonFiniteState("filter produced non-finite values");
  }
  return run;
}

SmootherRun run_smoother(std::span<const Observation> observations,
                         const FilterRun& filter_run, const SkfParams& params) {
  require_models(params);
  SmootherRun run;
  if (filter_run.filtered.empty()) return run;
  if (filter_run.filtered.size() != observations.size()) {
    throw ConfigError("smoother needs the filter pass of the same sequence");
  }

  const auto n = static_cast<Eigen::Index>(params.models.size());
  const Eigen::MatrixXd t_z = model_transition_matrix(params);
  const std::size_t t_count = filter_run.filtered.size();

  run.smoothed.resize(t_count);
  run.smoothed[t_count - 1] = filter_run.filtered[t_count - 1];

  for (std::size_t t = t_count - 1; t-- > 0;) {
    const StepBelief& filt = filter_run.filtered[t];
    const StepBelief& next = run.smoothed[t + 1];
    double dt = static_cast<double>(observations[t + 1].timestamp -
                                    observations[t].timestamp);
    dt = std::min(dt, params.max_dt_s);

    // Switch posterior P(model_t = j | model_{t+1} = k, data up to t).
    Eigen::MatrixXd back_weight(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      double denom = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        denom += filt.model_prob[j] * t_z(j, k);
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        back_weight(j, k) =
            denom > 0.0 ? filt.model_prob[j] * t_z(j, k) / denom
                        : 1.0 / static_cast<double>(n);
      }
    }

    // Per-branch RTS correction toward the smoothed next step.
    std::vector<GaussianState> branch(static_cast<std::size_t>(n * n));
    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::Matrix4d f = transition_matrix(params.models[k], dt);
      Eigen::Matrix4d q = process_noise(params.models[k], dt, params);
      for (Eigen::Index j = 0; j < n; ++j) {
        const GaussianState& cur = filt.per_model[j];
        GaussianState& out = branch[static_cast<std::size_t>(j * n + k)];
        if (dt > 0.0) {
          Eigen::Vector4d x_pred = f * cur.mean;
          Eigen::Matrix4d p_pred = f * cur.cov * f.transpose() + q;
          Eigen::LDLT<Eigen::Matrix4d> ldlt(p_pred);
          if (ldlt.info() != Eigen::Success) {
            throw NonFiniteState("predicted covariance not invertible");
          }
          // gain = P F' P_pred^{-1}, via the symmetric solve.
          Eigen::Matrix4d gain = ldlt.solve(f * cur.cov).transpose();
          out.mean = cur.mean + gain * (next.per_model[k].mean - x_pred);
          out.cov = cur.cov +
                    gain * (next.per_model[k].cov - p_pred) * gain.transpose();
        } else {
          // Zero elapsed time: the smoothed next state is the same instant.
          out = next.per_model[k];
        }
      }
    }

    StepBelief belief;
    belief.per_model.resize(n);
    Eigen::MatrixXd joint(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        joint(j, k) = next.model_prob[k] * back_weight(j, k);
      }
    }
    belief.model_prob = joint.rowwise().sum();
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXd mix(n);
      if (belief.model_prob[j] > 0.0) {
        for (Eigen::Index k = 0; k < n; ++k) {
          mix[k] = joint(j, k) / belief.model_prob[j];
        }
      } else {
        mix = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
      }
      std::vector<GaussianState> row(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        row[k] = branch[static_cast<std::size_t>(j * n + k)];
      }
      belief.per_model[j] = collapse_mixture(row, mix);
      audit_and_symmetrize(belief.per_model[j].cov, run.audit);
      if (!belief.per_model[j].mean.allFinite()) run.audit.all_finite = false;
    }
    audit_probabilities(belief.model_prob, run.audit);
    belief.combined = collapse_mixture(belief.per_model, belief.model_prob);
    audit_and_symmetrize(belief.combined.cov, run.audit);
    run.smoothed[t] = std::move(belief);
  }

  if (!run.audit.all_finite) {
    throw NonFiniteState("smoother produced non-finite values");
  }
  return run;
}

double stay_probability(const StepBelief& belief, const SkfParams& params) {
  double p = 0.0;
  for (std::size_t m = 0; m < params.models.size(); ++m) {
    if (params.models[m] == MotionKind::kStay) {
      p += belief.model_prob[static_cast<Eigen::Index>(m)];
    }
  }
  return p;
}

EstimateResult estimate_user(const ingest::Trajectory& traj,
                             const ingest::CoverageSet& coverage,
                             const SkfParams& params, bool use_filtered) {
  EstimateResult result;
  if (traj.events.empty()) return result;

  auto observations = make_observations(traj, coverage, params);
  FilterRun filter_run = run_filter(observations, params);
  SmootherRun smoother_run = run_smoother(observations, filter_run, params);
  result.audit = filter_run.audit;
  result.audit.merge(smoother_run.audit);

  result.rows.reserve(observations.size());
  for (std::size_t t = 0; t < observations.size(); ++t) {
    EstimateRow row;
    row.imsi = traj.user;
    row.timestamp = observations[t].timestamp;
    row.cell_id = observations[t].cell_id;
    row.p_stay_filtered = stay_probability(filter_run.filtered[t], params);
    row.p_stay_smoothed = stay_probability(smoother_run.smoothed[t], params);
    const GaussianState& state = use_filtered
                                     ? filter_run.filtered[t].combined
                                     : smoother_run.smoothed[t].combined;
    row.position = coverage.projection.from_local(
        geo::LocalPoint{state.mean(0), state.mean(1)});
    row.label = row.p_stay_smoothed >= params.stay_threshold
                    ? EpisodeLabel::kStay
                    : EpisodeLabel::kMove;
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string estimates_to_csv(std::span<const EstimateRow> rows) {
  std::string out =
      "imsi,timestamp,cell_id,lat,lon,p_stay_filtered,p_stay_smoothed,label\n";
  for (const auto& row : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", row.imsi, row.timestamp,
                       row.cell_id, io::format_double(row.position.lat),
                       io::format_double(row.position.lon),
                       io::format_double(row.p_stay_filtered),
                       io::format_double(row.p_stay_smoothed),
                       to_string(row.label));
  }
  return out;
}

std::vector<EstimateRow> parse_estimates(std::istream& in) {
  std::vector<EstimateRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput("missing header row");
  const std::string_view expected =
      "imsi,timestamp,cell_id,lat,lon,p_stay_filtered,p_stay_smoothed,label";
  if (io::strip_cr(line) != expected) {
    throw MalformedRow(1, fmt::format("expected header '{}', got '{}'",
                                      expected, io::strip_cr(line)));
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = io::strip_cr(line);
    if (body.empty()) continue;
    auto fields = io::split_csv_line(body);
    if (fields.size() != 8) {
      throw MalformedRow(line_no,
                         fmt::format("expected 8 fields, got {}", fields.size()));
    }
    EstimateRow row;
    row.imsi = fields[0];
    try {
      row.timestamp = std::stoll(fields[1]);
      row.cell_id = fields[2];
      row.position.lat = io::parse_double(fields[3]);
      row.position.lon = io::parse_double(fields[4]);
      row.p_stay_filtered = io::parse_double(fields[5]);
      row.p_stay_smoothed = io::parse_double(fields[6]);
      row.label = parse_episode_label(fields[7]);
    } catch (const ConfigError& e) {
      throw MalformedRow(line_no, e.what());
    } catch (const std::exception&) {
      throw MalformedRow(line_no, "non-numeric field");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cdrloc::skf
