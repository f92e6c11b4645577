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

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "cdrloc/errors.hpp"
#include "cdrloc/io.hpp"

namespace cdrloc::eval {
namespace {

using nlohmann::json;

json stats_json(const ErrorStats& stats) {
  return json{{"count", stats.count},
              {"mean_m", stats.mean_m},
              {"std_m", stats.std_m},
              {"rmse_m", stats.rmse_m}};
}

json table_json(const RmseTable& table) {
  return json{{"stay",
               {{"no_opt", table.no_opt.stay},
                {"opt", table.opt.stay},
                {"no_opt_mm", table.no_opt_mm.stay},
                {"opt_mm", table.opt_mm.stay}}},
              {"move",
               {{"no_opt", table.no_opt.move},
                {"opt", table.opt.move},
                {"no_opt_mm", table.no_opt_mm.move},
                {"opt_mm", table.opt_mm.move}}}};
}

}  // namespace

std::vector<Sample> to_samples(std::span<const skf::EstimateRow> rows) {
  std::vector<Sample> samples;
  samples.reserve(rows.size());
  for (const auto& row : rows) {
    samples.push_back(
        Sample{row.imsi, row.timestamp, row.position, row.label});
  }
  return samples;
}

std::vector<Sample> to_samples(std::span<const mapmatch::MatchRow> rows) {
  std::vector<Sample> samples;
  samples.reserve(rows.size());
  for (const auto& row : rows) {
    const geo::GeoPoint& pos = row.status == mapmatch::MatchStatus::kMatched
                                   ? row.matched
                                   : row.estimated;
    samples.push_back(Sample{row.imsi, row.timestamp, pos, row.label});
  }
  return samples;
}

PairingResult pair_truth(std::span<const Sample> samples,
                         std::span<const ingest::TruthFix> truth,
                         double max_skew_s) {
  std::unordered_map<std::string, std::vector<const ingest::TruthFix*>>
      by_user;
  for (const auto& fix : truth) by_user[fix.user].push_back(&fix);

  PairingResult result;
  for (const auto& sample : samples) {
    auto it = by_user.find(sample.user);
    if (it == by_user.end()) {
      ++result.unpaired;
      continue;
    }
    const auto& fixes = it->second;
    auto pos = std::lower_bound(
        fixes.begin(), fixes.end(), sample.timestamp,
        [](const ingest::TruthFix* fix, std::int64_t ts) {
          return fix->timestamp < ts;
        });
    // Nearest in time of the two bracketing fixes; ties take the earlier.
    const ingest::TruthFix* best = nullptr;
    std::int64_t best_skew = 0;
    if (pos != fixes.begin()) {
      best = *(pos - 1);
      best_skew = sample.timestamp - best->timestamp;
    }
    if (pos != fixes.end()) {
      std::int64_t skew = (*pos)->timestamp - sample.timestamp;
      if (best == nullptr || skew < best_skew) {
        best = *pos;
        best_skew = skew;
      }
    }
    if (best == nullptr || static_cast<double>(best_skew) > max_skew_s) {
      ++result.unpaired;
      continue;
    }
    TruthPair pair;
    pair.sample = sample;
    pair.truth = *best;
    pair.error_m = geo::haversine_m(sample.position, best->location);
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

AccuracyReport episode_accuracy(std::span<const TruthPair> pairs) {
  AccuracyReport report;
  for (const auto& pair : pairs) {
    bool correct = pair.sample.label == pair.truth.label;
    if (pair.truth.label == EpisodeLabel::kStay) {
      ++report.confusion.stay_total;
      if (correct) ++report.confusion.stay_correct;
    } else {
      ++report.confusion.move_total;
      if (correct) ++report.confusion.move_correct;
    }
  }
  if (report.confusion.stay_total > 0) {
    report.stay_accuracy = static_cast<double>(report.confusion.stay_correct) /
                           static_cast<double>(report.confusion.stay_total);
  }
  if (report.confusion.move_total > 0) {
    report.move_accuracy = static_cast<double>(report.confusion.move_correct) /
                           static_cast<double>(report.confusion.move_total);
  }
  return report;
}

ErrorStats error_stats(std::span<const double> errors_m, double bin_width_m) {
  if (errors_m.size() < 2) {
    throw InsufficientData(
        fmt::format("need >= 2 errors, got {}", errors_m.size()));
  }
  ErrorStats stats;
  stats.count = static_cast<std::int64_t>(errors_m.size());
  stats.histogram.bin_width_m = bin_width_m;

  double sum = 0.0;
  double sum_sq = 0.0;
  for (double e : errors_m) {
    sum += e;
    sum_sq += e * e;
  }
  const auto n = static_cast<double>(errors_m.size());
  stats.mean_m = sum / n;
  double variance = 0.0;
  for (double e : errors_m) {
    variance += (e - stats.mean_m) * (e - stats.mean_m);
  }
  variance /= n;  // population variance
  stats.std_m = std::sqrt(variance);
  stats.rmse_m = std::sqrt(sum_sq / n);

  for (double e : errors_m) {
    auto bin = static_cast<std::size_t>(std::max(0.0, e) / bin_width_m);
    if (stats.histogram.counts.size() <= bin) {
      stats.histogram.counts.resize(bin + 1, 0);
    }
    ++stats.histogram.counts[bin];
  }
  return stats;
}

std::vector<double> errors_for_label(std::span<const TruthPair> pairs,
                                     EpisodeLabel label) {
  std::vector<double> errors;
  for (const auto& pair : pairs) {
    if (pair.truth.label == label) errors.push_back(pair.error_m);
  }
  return errors;
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::kNoOpt:
      return "no_opt";
    case Variant::kOpt:
      return "opt";
    case Variant::kNoOptMm:
      return "no_opt_mm";
    case Variant::kOptMm:
      return "opt_mm";
  }
  return "no_opt";
}

namespace {

double rmse_of(std::span<const double> errors) {
  if (errors.empty()) return 0.0;
  double sum_sq = 0.0;
  for (double e : errors) sum_sq += e * e;
  return std::sqrt(sum_sq / static_cast<double>(errors.size()));
}

}  // namespace

RmseTable rmse_table(std::span<const VariantErrors> variants) {
  RmseTable table;
  bool seen[4] = {false, false, false, false};
  for (const auto& v : variants) {
    RmseCell cell{rmse_of(v.stay_errors_m), rmse_of(v.move_errors_m)};
    switch (v.variant) {
      case Variant::kNoOpt:
        table.no_opt = cell;
        break;
      case Variant::kOpt:
        table.opt = cell;
        break;
      case Variant::kNoOptMm:
        table.no_opt_mm = cell;
        break;
      case Variant::kOptMm:
        table.opt_mm = cell;
        break;
    }
    seen[static_cast<int>(v.variant)] = true;
  }
  for (int i = 0; i < 4; ++i) {
    if (!seen[i]) {
      throw MissingVariant(fmt::format(
          "variant '{}' missing", to_string(static_cast<Variant>(i))));
    }
  }
  return table;
}

std::string report_to_json(const EvalReport& report) {
  json accuracy{{"confusion",
                 {{"stay_correct", report.accuracy.confusion.stay_correct},
                  {"stay_total", report.accuracy.confusion.stay_total},
                  {"move_correct", report.accuracy.confusion.move_correct},
                  {"move_total", report.accuracy.confusion.move_total}}}};
  accuracy["stay_accuracy"] = report.accuracy.stay_accuracy.has_value()
                                  ? json(*report.accuracy.stay_accuracy)
                                  : json(nullptr);
  accuracy["move_accuracy"] = report.accuracy.move_accuracy.has_value()
                                  ? json(*report.accuracy.move_accuracy)
                                  : json(nullptr);

  const ReferenceBaseline& ref = report.reference;
  json doc{
      {"accuracy", accuracy},
      {"stay_error", stats_json(report.stay_stats)},
      {"move_error", stats_json(report.move_stats)},
      {"rmse_table", table_json(report.table)},
      {"paired", report.paired},
      {"unpaired", report.unpaired},
      // Published comparison figures, for context only.
      {"reference_baseline",
       {{"stay_accuracy_before", ref.stay_accuracy_before},
        {"stay_accuracy_after", ref.stay_accuracy_after},
        {"move_accuracy_before", ref.move_accuracy_before},
        {"move_accuracy_after", ref.move_accuracy_after},
        {"stay_error_mean_before_m", ref.stay_error_mean_before_m},
        {"stay_error_std_before_m", ref.stay_error_std_before_m},
        {"stay_error_mean_after_m", ref.stay_error_mean_after_m},
        {"stay_error_std_after_m", ref.stay_error_std_after_m},
        {"move_error_mean_before_m", ref.move_error_mean_before_m},
        {"move_error_std_before_m", ref.move_error_std_before_m},
        {"move_error_mean_after_m", ref.move_error_mean_after_m},
        {"move_error_std_after_m", ref.move_error_std_after_m},
        {"rmse_table", table_json(ref.rmse)}}},
  };
  return doc.dump(2) + "\n";
}

std::string histogram_csv(const EvalReport& report) {
  std::string out = "label,bin_lo_m,bin_hi_m,count\n";
  auto emit = [&out](EpisodeLabel label, const Histogram& hist) {
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      out += fmt::format("{},{},{},{}\n", to_string(label),
                         io::format_double(i * hist.bin_width_m),
                         io::format_double((i + 1) * hist.bin_width_m),
                         hist.counts[i]);
    }
  };
  emit(EpisodeLabel::kStay, report.stay_stats.histogram);
  emit(EpisodeLabel::kMove, report.move_stats.histogram);
  return out;
}

std::string histogram_columns(const EvalReport& report) {
  const Histogram& stay = report.stay_stats.histogram;
  const Histogram& move = report.move_stats.histogram;
  double width = stay.bin_width_m;
  std::size_t bins = std::max(stay.counts.size(), move.counts.size());
  std::string out = "# bin_center_m stay_count move_count\n";
  for (std::size_t i = 0; i < bins; ++i) {
    std::int64_t s = i < stay.counts.size() ? stay.counts[i] : 0;
    std::int64_t m = i < move.counts.size() ? move.counts[i] : 0;
    out += fmt::format("{} {} {}\n",
                       io::format_double((i + 0.5) * width), s, m);
  }
  return out;
}

}  // namespace cdrloc::eval
