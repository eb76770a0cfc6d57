#pragma once

#include "osal/ensemble.hpp"
#include "osal/model.hpp"
#include "osal/pool.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace osal {

struct RoundRecord {
  std::string variant;
  std::uint64_t seed = 0;
  int round = 0;
  double test_accuracy = 0.0;
  std::optional<double> inlier_rate;            // absent when nothing was acquired
  std::optional<double> pseudo_label_accuracy;  // absent without semi-supervision
  std::vector<int> acquired_ids;
  double wall_time_ms = 0.0;
  double supervised_ms = 0.0;
  double semi_ms = 0.0;
  double scoring_ms = 0.0;
};

/// Accuracy of a single network on an inlier-only test set. The argmax runs
/// over the K inlier outputs unless `count_outlier_as_error` is set, in which
/// case it runs over all outputs and an outlier-class argmax is a miss.
double eval_test_accuracy(const Classifier& model, const Dataset& test_set, bool count_outlier_as_error = false);

double inlier_rate(std::span<const int> acquired_ids, const Oracle& oracle);

double pseudo_label_accuracy(const PseudoLabelMap& pseudo_labels, const Oracle& oracle);

struct VrSample {
  int id = 0;
  double vr = 0.0;
  bool predicted_outlier = false;
};

struct VrHistogram {
  int bins = 0;
  // counts[bin][outlier ? 1 : 0][filtered ? 1 : 0]
  std::vector<std::array<std::array<long, 2>, 2>> counts;

  long count(int bin, bool outlier, bool filtered) const { return counts[bin][outlier][filtered]; }
  long total() const;
};

/// Bin b covers [b / bins, (b + 1) / bins); VR = 1 falls in the last bin.
/// Without filtering every sample counts as kept.
VrHistogram vr_histogram(std::span<const VrSample> samples, const Oracle& oracle, int bins, bool filtering);

// Delimited text emitters.

std::string metrics_header();
std::string format_metrics_row(const RoundRecord& r, bool with_wall_time);
std::string format_acquired_rows(const RoundRecord& r);  // variant,seed,round,rank,id

struct SummaryRow {
  std::string variant;
  int round = 0;
  int seeds = 0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  std::optional<double> inlier_rate_mean, inlier_rate_std;
  std::optional<double> pseudo_accuracy_mean, pseudo_accuracy_std;
};

/// Mean and sample standard deviation across seeds per (variant, round),
/// in first-seen variant order.
std::vector<SummaryRow> summarize(std::span<const RoundRecord> records);
std::string format_summary(std::span<const SummaryRow> rows);

std::string format_number(double v);
std::string csv_field(const std::string& s);

}  // namespace osal
