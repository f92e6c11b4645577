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

#ifndef CDRLOC_EVAL_HPP_
#define CDRLOC_EVAL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdrloc/geo.hpp"
#include "cdrloc/ingest.hpp"
#include "cdrloc/mapmatch.hpp"
#include "cdrloc/skf.hpp"
#include "cdrloc/types.hpp"

namespace cdrloc::eval {

/// Position sample under evaluation, decoupled from where it came from.
struct Sample {
  std::string user;
  std::int64_t timestamp = 0;
  geo::GeoPoint position;
  EpisodeLabel label = EpisodeLabel::kStay;
};

std::vector<Sample> to_samples(std::span<const skf::EstimateRow> rows);

/// Matched rows evaluate at the snapped position when matched, the raw
/// estimate otherwise.
std::vector<Sample> to_samples(std::span<const mapmatch::MatchRow> rows);

struct TruthPair {
  Sample sample;
  ingest::TruthFix truth;
  double error_m = 0.0;  // great-circle distance sample vs truth
};

struct PairingResult {
  std::vector<TruthPair> pairs;
  int unpaired = 0;
};

/// Pairs each sample with its nearest-in-time truth fix for the same user
/// within max_skew_s; samples without one are counted and dropped. Both
/// inputs must be time-sorted per user.
PairingResult pair_truth(std::span<const Sample> samples,
                         std::span<const ingest::TruthFix> truth,
                         double max_skew_s = 60.0);

struct Confusion {
  std::int64_t stay_correct = 0;
  std::int64_t stay_total = 0;
  std::int64_t move_correct = 0;
  std::int64_t move_total = 0;
};

struct AccuracyReport {
  Confusion confusion;
  std::optional<double> stay_accuracy;  // absent when the class is empty
  std::optional<double> move_accuracy;
};

AccuracyReport episode_accuracy(std::span<const TruthPair> pairs);

struct Histogram {
  double bin_width_m = 500.0;
  std::vector<std::int64_t> counts;  // bin k covers [k*w, (k+1)*w)
};

struct ErrorStats {
  std::int64_t count = 0;
  double mean_m = 0.0;
  double std_m = 0.0;  // population standard deviation
  double rmse_m = 0.0;
  Histogram histogram;
};

/// Throws InsufficientData below two values.
ErrorStats error_stats(std::span<const double> errors_m,
                       double bin_width_m = 500.0);

/// Errors split by truth label, in pair order.
std::vector<double> errors_for_label(std::span<const TruthPair> pairs,
                                     EpisodeLabel label);

// Pipeline variants compared in the summary table.
enum class Variant { kNoOpt, kOpt, kNoOptMm, kOptMm };

std::string_view to_string(Variant variant);

struct VariantErrors {
  Variant variant = Variant::kNoOpt;
  std::vector<double> stay_errors_m;
  std::vector<double> move_errors_m;
};

struct RmseCell {
  double stay = 0.0;
  double move = 0.0;
};

struct RmseTable {
  RmseCell no_opt;
  RmseCell opt;
  RmseCell no_opt_mm;
  RmseCell opt_mm;
};

/// Requires all four variants; throws MissingVariant otherwise.
RmseTable rmse_table(std::span<const VariantErrors> variants);

/// Externally published comparison figures embedded in reports for
/// context. Never used as pass/fail thresholds.
struct ReferenceBaseline {
  double stay_accuracy_before = 0.75;
  double stay_accuracy_after = 0.92;
  double move_accuracy_before = 0.54;
  double move_accuracy_after = 0.87;
  double move_error_mean_before_m = 4912.9;
  double move_error_std_before_m = 6510.4;
  double move_error_mean_after_m = 4937.0;
  double move_error_std_after_m = 6083.2;
  double stay_error_mean_before_m = 637.0;
  double stay_error_std_before_m = 2008.1;
  double stay_error_mean_after_m = 476.4;
  double stay_error_std_after_m = 1739.2;
  RmseTable rmse{.no_opt = {2106.8, 8156.1},
                 .opt = {1803.3, 7834.5},
                 .no_opt_mm = {2788.1, 4712.1},
                 .opt_mm = {2402.6, 3344.4}};
};

struct EvalReport {
  AccuracyReport accuracy;       // from the primary (opt) variant
  ErrorStats stay_stats;
  ErrorStats move_stats;
  RmseTable table;
  int paired = 0;
  int unpaired = 0;
  ReferenceBaseline reference;
};

std::string report_to_json(const EvalReport& report);

/// `label,bin_lo_m,bin_hi_m,count` rows for both labels.
std::string histogram_csv(const EvalReport& report);

/// Whitespace-separated columns (bin center, stay count, move count) for
/// direct plotting.
std::string histogram_columns(const EvalReport& report);

}  // namespace cdrloc::eval

#endif  // CDRLOC_EVAL_HPP_
