#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace osal {

struct Example {
  int id = 0;
  Eigen::VectorXd features;
  int true_label = 0;  // num_inlier_classes means outlier
};

/// Feature matrix with one column per example. Column index is the example id.
struct Dataset {
  Eigen::MatrixXd features;  // dim x size
  std::vector<int> labels;   // ground truth, read through Oracle by the loop
  int num_inlier_classes = 0;

  int dim() const { return static_cast<int>(features.rows()); }
  int size() const { return static_cast<int>(features.cols()); }
  int outlier_label() const { return num_inlier_classes; }
  Example example(int id) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.num_inlier_classes == b.num_inlier_classes && a.labels == b.labels &&
           a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
           a.features == b.features;
  }
};

/// The only sanctioned reader of ground-truth labels.
class Oracle {
 public:
  explicit Oracle(const Dataset& data) : data_(&data) {}

  int label(int id) const;
  bool is_outlier(int id) const { return label(id) == data_->outlier_label(); }
  int outlier_label() const { return data_->outlier_label(); }

 private:
  const Dataset* data_;
};

struct PoolState {
  std::vector<int> labeled_ids;       // in acquisition order, L_0 first
  std::vector<int> unlabeled_ids;     // ascending
  std::map<int, int> revealed_labels; // id -> label for every labeled id
  int round = 0;

  bool is_labeled(int id) const { return revealed_labels.contains(id); }

  friend bool operator==(const PoolState&, const PoolState&) = default;
};

struct BenchmarkSpec {
  int num_classes = 5;  // K inlier classes
  int dim = 8;

  // Inlier clusters. Explicit means/stddevs win over the generated ones.
  std::vector<Eigen::VectorXd> inlier_means;
  std::vector<double> inlier_stddevs;
  double inlier_mean_scale = 1.5;
  double inlier_stddev = 1.0;

  // Outliers come from their own clusters, kept at least
  // outlier_min_separation away from every inlier mean.
  int outlier_clusters = 20;
  double outlier_mean_scale = 3.0;
  double outlier_stddev = 1.0;
  double outlier_min_separation = 2.0;

  int n_inlier_per_class = 100;   // unlabeled inliers per class
  int n_outlier = -1;             // < 0: derived from outlier_ratio
  std::optional<double> outlier_ratio;
  int initial_labeled_per_class = 2;
  int test_per_class = 200;
  std::uint64_t seed = 0;

  /// Outlier count after resolving n_outlier against outlier_ratio.
  int resolved_outlier_count() const;
  void validate() const;
};

struct Benchmark {
  Dataset data;
  PoolState initial_pool;
  Dataset test_set;
};

Benchmark generate_benchmark(const BenchmarkSpec& spec);

PoolState annotate(const PoolState& pool, std::span<const int> acquired_ids, const Oracle& oracle,
                   int budget);

/// Throws std::logic_error when partition, budget, or oracle soundness fails
/// for `pool` relative to the starting pool.
void check_pool_invariants(const PoolState& pool, const PoolState& initial, int budget,
                           const Oracle& oracle);

/// Throws std::logic_error unless L grows and U shrinks from `before` to `after`.
void check_monotone(const PoolState& before, const PoolState& after);

struct FeatureSchema {
  int num_inlier_classes = 0;
  char delimiter = ',';
};

/// Columns: id, split, label, f0..f{d-1}. Pool rows must carry ids 0..n-1;
/// test rows are re-indexed in file order.
Benchmark load_feature_dataset(const std::filesystem::path& path, const FeatureSchema& schema);

void write_feature_dataset(const std::filesystem::path& path, const Benchmark& benchmark,
                           char delimiter = ',');

std::string format_feature_dataset(const Benchmark& benchmark, char delimiter = ',');
Benchmark parse_feature_dataset(const std::string& text, const FeatureSchema& schema);

}  // namespace osal
