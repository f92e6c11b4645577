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

#include "cdrloc/eval.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cdrloc/errors.hpp"
#include "cdrloc/geo.hpp"
#include "cdrloc/ingest.hpp"
#include "cdrloc/mapmatch.hpp"
#include "cdrloc/skf.hpp"
#include "cdrloc/types.hpp"

namespace cdrloc::eval {
namespace {

ingest::TruthFix fix(const std::string& user, std::int64_t ts, double lat,
                     double lon, EpisodeLabel label) {
  ingest::TruthFix f;
  f.user = user;
  f.timestamp = ts;
  f.location = geo::GeoPoint{lat, lon};
  f.label = label;
  return f;
}

Sample sample(const std::string& user, std::int64_t ts, double lat, double lon,
              EpisodeLabel label = EpisodeLabel::kStay) {
  return Sample{user, ts, geo::GeoPoint{lat, lon}, label};
}

TEST(ToSamples, EstimateRowsCarryPositionAndLabel) {
  std::vector<skf::EstimateRow> rows(2);
  rows[0].imsi = "u1";
  rows[0].timestamp = 100;
  rows[0].position = geo::GeoPoint{58.0, 26.0};
  rows[0].label = EpisodeLabel::kStay;
  rows[1].imsi = "u2";
  rows[1].timestamp = 200;
  rows[1].position = geo::GeoPoint{58.1, 26.1};
  rows[1].label = EpisodeLabel::kMove;

  auto samples = to_samples(std::span<const skf::EstimateRow>(rows));
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].user, "u1");
  EXPECT_EQ(samples[0].timestamp, 100);
  EXPECT_DOUBLE_EQ(samples[0].position.lat, 58.0);
  EXPECT_EQ(samples[0].label, EpisodeLabel::kStay);
  EXPECT_EQ(samples[1].label, EpisodeLabel::kMove);
}

TEST(ToSamples, MatchRowsUseSnappedPositionOnlyWhenMatched) {
  mapmatch::MatchRow matched;
  matched.imsi = "u";
  matched.timestamp = 10;
  matched.label = EpisodeLabel::kMove;
  matched.estimated = geo::GeoPoint{58.0, 26.0};
  matched.matched = geo::GeoPoint{58.5, 26.5};
  matched.status = mapmatch::MatchStatus::kMatched;

  mapmatch::MatchRow unmatched = matched;
  unmatched.timestamp = 20;
  unmatched.status = mapmatch::MatchStatus::kUnmatched;

  std::vector<mapmatch::MatchRow> rows{matched, unmatched};
  auto samples = to_samples(std::span<const mapmatch::MatchRow>(rows));
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_DOUBLE_EQ(samples[0].position.lat, 58.5);
  EXPECT_DOUBLE_EQ(samples[0].position.lon, 26.5);
  EXPECT_DOUBLE_EQ(samples[1].position.lat, 58.0);
  EXPECT_DOUBLE_EQ(samples[1].position.lon, 26.0);
  EXPECT_EQ(samples[0].label, EpisodeLabel::kMove);
}

TEST(PairTruth, NearestFixWinsAndTiesTakeTheEarlier) {
  std::vector<ingest::TruthFix> truth{
      fix("u", 100, 58.0, 26.0, EpisodeLabel::kStay),
      fix("u", 200, 58.1, 26.1, EpisodeLabel::kMove)};
  std::vector<Sample> samples{sample("u", 149, 58.0, 26.0),
                              sample("u", 150, 58.0, 26.0),
                              sample("u", 151, 58.0, 26.0)};

  auto result = pair_truth(samples, truth, 60.0);
  ASSERT_EQ(result.pairs.size(), 3u);
  EXPECT_EQ(result.unpaired, 0);
  EXPECT_EQ(result.pairs[0].truth.timestamp, 100);
  // Equidistant fixes resolve to the earlier one.
  EXPECT_EQ(result.pairs[1].truth.timestamp, 100);
  EXPECT_EQ(result.pairs[2].truth.timestamp, 200);
}

TEST(PairTruth, SkewLimitIsInclusiveAndUnknownUsersDrop) {
  std::vector<ingest::TruthFix> truth{
      fix("u", 1000, 58.0, 26.0, EpisodeLabel::kStay)};
  std::vector<Sample> samples{sample("u", 1060, 58.0, 26.0),
                              sample("u", 1061, 58.0, 26.0),
                              sample("ghost", 1000, 58.0, 26.0)};

  auto result = pair_truth(samples, truth, 60.0);
  ASSERT_EQ(result.pairs.size(), 1u);
  EXPECT_EQ(result.pairs[0].sample.timestamp, 1060);
  EXPECT_EQ(result.unpaired, 2);
}

TEST(PairTruth, ErrorIsGreatCircleDistance) {
  geo::GeoPoint a{58.0, 26.0};
  geo::GeoPoint b{58.01, 26.02};
  std::vector<ingest::TruthFix> truth{
      fix("u", 0, b.lat, b.lon, EpisodeLabel::kStay)};
  std::vector<Sample> samples{sample("u", 0, a.lat, a.lon)};

  auto result = pair_truth(samples, truth);
  ASSERT_EQ(result.pairs.size(), 1u);
  EXPECT_NEAR(result.pairs[0].error_m, geo::haversine_m(a, b), 1e-9);
}

TEST(PairTruth, MatchesBruteForceOnRandomSeries) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::int64_t> step(1, 120);
  std::uniform_real_distribution<double> coord(-0.05, 0.05);
  const double max_skew = 60.0;

  std::vector<ingest::TruthFix> truth;
  std::vector<Sample> samples;
  for (const std::string user : {"a", "b", "c"}) {
    std::int64_t t = 1000;
    for (int i = 0; i < 40; ++i) {
      t += step(rng);
      truth.push_back(fix(user, t, 58.0 + coord(rng), 26.0 + coord(rng),
                          i % 2 == 0 ? EpisodeLabel::kStay
                                     : EpisodeLabel::kMove));
    }
    std::int64_t s = 900;
    for (int i = 0; i < 60; ++i) {
      s += step(rng);
      samples.push_back(
          sample(user, s, 58.0 + coord(rng), 26.0 + coord(rng)));
    }
  }

  auto result = pair_truth(samples, truth, max_skew);

  // Brute force: smallest absolute skew within the limit, earlier fix on
  // ties, restricted to the same user.
  int expected_unpaired = 0;
  std::size_t next = 0;
  for (const auto& s : samples) {
    const ingest::TruthFix* best = nullptr;
    for (const auto& f : truth) {
      if (f.user != s.user) continue;
      if (std::abs(f.timestamp - s.timestamp) >
          static_cast<std::int64_t>(max_skew)) {
        continue;
      }
      if (best == nullptr ||
          std::abs(f.timestamp - s.timestamp) <
              std::abs(best->timestamp - s.timestamp) ||
          (std::abs(f.timestamp - s.timestamp) ==
               std::abs(best->timestamp - s.timestamp) &&
           f.timestamp < best->timestamp)) {
        best = &f;
      }
    }
    if (best == nullptr) {
      ++expected_unpaired;
      continue;
    }
    ASSERT_LT(next, result.pairs.size());
    EXPECT_EQ(result.pairs[next].sample.timestamp, s.timestamp);
    EXPECT_EQ(result.pairs[next].truth.timestamp, best->timestamp);
    ++next;
  }
  EXPECT_EQ(next, result.pairs.size());
  EXPECT_EQ(result.unpaired, expected_unpaired);
}

TEST(EpisodeAccuracy, CountsPerTruthLabelAndLeavesEmptyClassesUnset) {
  auto make_pair = [](EpisodeLabel est, EpisodeLabel truth_label) {
    TruthPair p;
    p.sample.label = est;
    p.truth.label = truth_label;
    return p;
  };
  std::vector<TruthPair> pairs{
      make_pair(EpisodeLabel::kStay, EpisodeLabel::kStay),
      make_pair(EpisodeLabel::kStay, EpisodeLabel::kStay),
      make_pair(EpisodeLabel::kMove, EpisodeLabel::kStay),
      make_pair(EpisodeLabel::kMove, EpisodeLabel::kMove),
      make_pair(EpisodeLabel::kStay, EpisodeLabel::kMove)};

  auto report = episode_accuracy(pairs);
  EXPECT_EQ(report.confusion.stay_total, 3);
  EXPECT_EQ(report.confusion.stay_correct, 2);
  EXPECT_EQ(report.confusion.move_total, 2);
  EXPECT_EQ(report.confusion.move_correct, 1);
  ASSERT_TRUE(report.stay_accuracy.has_value());
  ASSERT_TRUE(report.move_accuracy.has_value());
  EXPECT_NEAR(*report.stay_accuracy, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(*report.move_accuracy, 0.5, 1e-12);

  std::vector<TruthPair> stay_only{
      make_pair(EpisodeLabel::kStay, EpisodeLabel::kStay)};
  auto partial = episode_accuracy(stay_only);
  EXPECT_TRUE(partial.stay_accuracy.has_value());
  EXPECT_FALSE(partial.move_accuracy.has_value());

  auto empty = episode_accuracy(std::span<const TruthPair>{});
  EXPECT_FALSE(empty.stay_accuracy.has_value());
  EXPECT_FALSE(empty.move_accuracy.has_value());
}

TEST(ErrorStats, HandComputedMomentsSatisfyTheRmseIdentity) {
  std::vector<double> errors{3.0, 4.0, 5.0};
  auto stats = error_stats(errors);
  EXPECT_EQ(stats.count, 3);
  EXPECT_NEAR(stats.mean_m, 4.0, 1e-12);
  EXPECT_NEAR(stats.std_m, std::sqrt(2.0 / 3.0), 1e-12);
  EXPECT_NEAR(stats.rmse_m, std::sqrt(50.0 / 3.0), 1e-12);
  // Population moments: rmse^2 == mean^2 + std^2.
  EXPECT_NEAR(stats.rmse_m * stats.rmse_m,
              stats.mean_m * stats.mean_m + stats.std_m * stats.std_m, 1e-9);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 5000.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> random_errors;
    for (int i = 0; i < 200; ++i) random_errors.push_back(dist(rng));
    auto s = error_stats(random_errors);
    EXPECT_NEAR(s.rmse_m * s.rmse_m,
                s.mean_m * s.mean_m + s.std_m * s.std_m,
                1e-6 * s.rmse_m * s.rmse_m);
  }
}

TEST(ErrorStats, ThrowsBelowTwoValues) {
  EXPECT_THROW(error_stats(std::span<const double>{}), InsufficientData);
  std::vector<double> one{7.0};
  EXPECT_THROW(error_stats(one), InsufficientData);
}

TEST(ErrorStats, HistogramBinsAreHalfOpenAndClampNegatives) {
  std::vector<double> errors{0.0, 499.999, 500.0, 999.9, 1500.0, -1.0};
  auto stats = error_stats(errors, 500.0);
  ASSERT_EQ(stats.histogram.counts.size(), 4u);
  EXPECT_EQ(stats.histogram.counts[0], 3);  // 0, 499.999, clamped -1
  EXPECT_EQ(stats.histogram.counts[1], 2);  // boundary 500 rolls up
  EXPECT_EQ(stats.histogram.counts[2], 0);
  EXPECT_EQ(stats.histogram.counts[3], 1);
  EXPECT_DOUBLE_EQ(stats.histogram.bin_width_m, 500.0);
}

TEST(ErrorsForLabel, SplitsByTruthLabelInPairOrder) {
  std::vector<TruthPair> pairs(4);
  pairs[0].truth.label = EpisodeLabel::kStay;
  pairs[0].error_m = 10.0;
  pairs[1].truth.label = EpisodeLabel::kMove;
  pairs[1].error_m = 20.0;
  pairs[2].truth.label = EpisodeLabel::kStay;
  pairs[2].error_m = 30.0;
  pairs[3].truth.label = EpisodeLabel::kMove;
  pairs[3].error_m = 40.0;

  auto stay = errors_for_label(pairs, EpisodeLabel::kStay);
  auto move = errors_for_label(pairs, EpisodeLabel::kMove);
  EXPECT_EQ(stay, (std::vector<double>{10.0, 30.0}));
  EXPECT_EQ(move, (std::vector<double>{20.0, 40.0}));
}

TEST(RmseTable, FillsEveryCellAndRejectsMissingVariants) {
  std::vector<VariantErrors> variants(4);
  variants[0] = {Variant::kNoOpt, {3.0, 4.0}, {6.0, 8.0}};
  variants[1] = {Variant::kOpt, {5.0}, {}};
  variants[2] = {Variant::kNoOptMm, {1.0, 1.0, 1.0}, {2.0}};
  variants[3] = {Variant::kOptMm, {}, {10.0}};

  auto table = rmse_table(variants);
  EXPECT_NEAR(table.no_opt.stay, std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(table.no_opt.move, std::sqrt(50.0), 1e-12);
  EXPECT_NEAR(table.opt.stay, 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(table.opt.move, 0.0);  // empty class reports zero
  EXPECT_NEAR(table.no_opt_mm.stay, 1.0, 1e-12);
  EXPECT_NEAR(table.opt_mm.move, 10.0, 1e-12);

  variants.erase(variants.begin() + 2);
  try {
    rmse_table(variants);
    FAIL() << "expected MissingVariant";
  } catch (const MissingVariant& err) {
    EXPECT_NE(std::string(err.what()).find("no_opt_mm"), std::string::npos);
  }
}

TEST(VariantNames, RoundTripThroughToString) {
  EXPECT_EQ(to_string(Variant::kNoOpt), "no_opt");
  EXPECT_EQ(to_string(Variant::kOpt), "opt");
  EXPECT_EQ(to_string(Variant::kNoOptMm), "no_opt_mm");
  EXPECT_EQ(to_string(Variant::kOptMm), "opt_mm");
}

EvalReport small_report() {
  EvalReport report;
  report.accuracy.confusion = {2, 3, 1, 2};
  report.accuracy.stay_accuracy = 2.0 / 3.0;
  report.accuracy.move_accuracy = 0.5;
  std::vector<double> stay{100.0, 700.0};
  std::vector<double> move{200.0, 1600.0};
  report.stay_stats = error_stats(stay);
  report.move_stats = error_stats(move);
  report.table.no_opt = {500.0, 900.0};
  report.table.opt = {400.0, 850.0};
  report.table.no_opt_mm = {550.0, 600.0};
  report.table.opt_mm = {450.0, 500.0};
  report.paired = 5;
  report.unpaired = 1;
  return report;
}

TEST(ReportJson, ParsesBackWithAllSectionsAndNullForEmptyClasses) {
  EvalReport report = small_report();
  auto doc = nlohmann::json::parse(report_to_json(report));
  EXPECT_EQ(doc["accuracy"]["confusion"]["stay_total"], 3);
  EXPECT_NEAR(doc["accuracy"]["stay_accuracy"].get<double>(), 2.0 / 3.0,
              1e-12);
  EXPECT_NEAR(doc["stay_error"]["rmse_m"].get<double>(),
              report.stay_stats.rmse_m, 1e-12);
  EXPECT_NEAR(doc["rmse_table"]["move"]["opt_mm"].get<double>(), 500.0,
              1e-12);
  EXPECT_EQ(doc["paired"], 5);
  EXPECT_EQ(doc["unpaired"], 1);
  // Published comparison figures ride along for context.
  EXPECT_NEAR(doc["reference_baseline"]["stay_accuracy_after"].get<double>(),
              0.92, 1e-12);
  EXPECT_NEAR(
      doc["reference_baseline"]["rmse_table"]["move"]["opt_mm"].get<double>(),
      3344.4, 1e-12);

  report.accuracy.move_accuracy.reset();
  auto doc2 = nlohmann::json::parse(report_to_json(report));
  EXPECT_TRUE(doc2["accuracy"]["move_accuracy"].is_null());
}

TEST(ReportHistograms, CsvAndColumnOutputsMatchTheBins) {
  EvalReport report = small_report();
  // stay errors 100, 700 -> bins 0 and 1; move errors 200, 1600 -> 0 and 3.
  EXPECT_EQ(histogram_csv(report),
            "label,bin_lo_m,bin_hi_m,count\n"
            "STAY,0,500,1\n"
            "STAY,500,1000,1\n"
            "MOVE,0,500,1\n"
            "MOVE,500,1000,0\n"
            "MOVE,1000,1500,0\n"
            "MOVE,1500,2000,1\n");
  EXPECT_EQ(histogram_columns(report),
            "# bin_center_m stay_count move_count\n"
            "250 1 1\n"
            "750 1 0\n"
            "1250 0 0\n"
            "1750 0 1\n");
}

}  // namespace
}  // namespace cdrloc::eval
