#include "osal/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>

namespace osal {

double eval_test_accuracy(const Classifier& model, const Dataset& test_set, bool count_outlier_as_error) {
  if (test_set.size() == 0) throw std::invalid_argument("eval_test_accuracy: empty test set");
  const int k = test_set.num_inlier_classes;
  const Eigen::MatrixXd probs = model.predict_batch(test_set.features);
  const Eigen::Index rows = count_outlier_as_error ? probs.rows() : std::min<Eigen::Index>(k, probs.rows());
  int correct = 0;
  for (int i = 0; i < test_set.size(); ++i)
    if (argmax(probs.col(i).head(rows)) == test_set.labels[static_cast<std::size_t>(i)]) ++correct;
  return static_cast<double>(correct) / test_set.size();
}

double inlier_rate(std::span<const int> acquired_ids, const Oracle& oracle) {
  if (acquired_ids.empty()) throw std::invalid_argument("inlier_rate: empty acquisition");
  const auto inliers = std::count_if(acquired_ids.begin(), acquired_ids.end(),
                                     [&](int id) { return !oracle.is_outlier(id); });
  return static_cast<double>(inliers) / static_cast<double>(acquired_ids.size());
}

double pseudo_label_accuracy(const PseudoLabelMap& pseudo_labels, const Oracle& oracle) {
  if (pseudo_labels.empty()) throw std::invalid_argument("pseudo_label_accuracy: empty map");
  long correct = 0;
  for (const auto& [id, pl] : pseudo_labels)
    if (pl.label == oracle.label(id)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pseudo_labels.size());
}

long VrHistogram::total() const {
  long n = 0;
  for (const auto& bin : counts)
    for (const auto& row : bin) n += row[0] + row[1];
  return n;
}

VrHistogram vr_histogram(std::span<const VrSample> samples, const Oracle& oracle, int bins, bool filtering) {
  if (bins < 1) throw std::invalid_argument("vr_histogram: bins must be positive");
  VrHistogram h;
  h.bins = bins;
  h.counts.assign(static_cast<std::size_t>(bins), {});
  for (const auto& s : samples) {
    const int b = std::clamp(static_cast<int>(std::floor(s.vr * bins + 1e-9)), 0, bins - 1);
    const bool filtered = filtering && s.predicted_outlier;
    ++h.counts[static_cast<std::size_t>(b)][oracle.is_outlier(s.id)][filtered];
  }
  return h;
}

std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

namespace {

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

std::string metrics_header() {
  return "variant,seed,round,test_accuracy,inlier_rate,pseudo_label_accuracy,wall_time_ms\n";
}

std::string format_metrics_row(const RoundRecord& r, bool with_wall_time) {
  std::string out = csv_field(r.variant);
  out += ',' + std::to_string(r.seed) + ',' + std::to_string(r.round) + ',' + format_number(r.test_accuracy);
  out += ',' + optional_number(r.inlier_rate);
  out += ',' + optional_number(r.pseudo_label_accuracy);
  out += ',' + (with_wall_time ? format_number(std::round(r.wall_time_ms * 1000.0) / 1000.0) : std::string());
  out += '\n';
  return out;
}

std::string format_acquired_rows(const RoundRecord& r) {
  std::string out;
  const std::string prefix = csv_field(r.variant) + ',' + std::to_string(r.seed) + ',' + std::to_string(r.round) + ',';
  for (std::size_t i = 0; i < r.acquired_ids.size(); ++i)
    out += prefix + std::to_string(i) + ',' + std::to_string(r.acquired_ids[i]) + '\n';
  return out;
}

std::vector<SummaryRow> summarize(std::span<const RoundRecord> records) {
  std::vector<std::string> order;
  std::map<std::pair<std::string, int>, std::vector<const RoundRecord*>> groups;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
    groups[{r.variant, r.round}].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& variant : order) {
    for (auto it = groups.lower_bound({variant, 0}); it != groups.end() && it->first.first == variant; ++it) {
      SummaryRow row;
      row.variant = variant;
      row.round = it->first.second;
      row.seeds = static_cast<int>(it->second.size());
      std::vector<double> acc, rate, pseudo;
      for (const auto* r : it->second) {
        acc.push_back(r->test_accuracy);
        if (r->inlier_rate) rate.push_back(*r->inlier_rate);
        if (r->pseudo_label_accuracy) pseudo.push_back(*r->pseudo_label_accuracy);
      }
      std::tie(row.accuracy_mean, row.accuracy_std) = mean_std(acc);
      if (!rate.empty()) {
        const auto [m, s] = mean_std(rate);
        row.inlier_rate_mean = m;
        row.inlier_rate_std = s;
      }
      if (!pseudo.empty()) {
        const auto [m, s] = mean_std(pseudo);
        row.pseudo_accuracy_mean = m;
        row.pseudo_accuracy_std = s;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string format_summary(std::span<const SummaryRow> rows) {
  std::string out =
      "variant,round,seeds,test_accuracy_mean,test_accuracy_std,inlier_rate_mean,inlier_rate_std,"
      "pseudo_label_accuracy_mean,pseudo_label_accuracy_std\n";
  for (const auto& r : rows) {
    out += csv_field(r.variant) + ',' + std::to_string(r.round) + ',' + std::to_string(r.seeds) + ',' +
           format_number(r.accuracy_mean) + ',' + format_number(r.accuracy_std) + ',' +
           optional_number(r.inlier_rate_mean) + ',' + optional_number(r.inlier_rate_std) + ',' +
           optional_number(r.pseudo_accuracy_mean) + ',' + optional_number(r.pseudo_accuracy_std) + '\n';
  }
  return out;
}

}  // namespace osal
