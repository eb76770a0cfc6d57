#pragma once

#include "osal/ensemble.hpp"
#include "osal/model.hpp"
#include "osal/pool.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace osal {

enum class Scorer { random, entropy, max_confidence, vr, coreset };
enum class AcquisitionTiming { before_semi, after_semi };

Scorer parse_scorer(std::string_view name);
const char* to_string(Scorer s);
AcquisitionTiming parse_timing(std::string_view name);
const char* to_string(AcquisitionTiming t);

struct AcquisitionConfig {
  Scorer scorer = Scorer::vr;
  bool filtering = true;
  int budget = 50;
  AcquisitionTiming timing = AcquisitionTiming::after_semi;
  bool coreset_average_features = false;  // else member 0's penultimate layer
};

struct ScoredExample {
  int id = 0;
  double raw_score = 0.0;
  bool predicted_outlier = false;
  double final_score = 0.0;
};

std::vector<double> score_random(std::span<const int> ids, std::uint64_t seed);
std::vector<double> score_entropy(std::span<const EnsemblePrediction> predictions);
std::vector<double> score_max_confidence(std::span<const EnsemblePrediction> predictions);
std::vector<double> score_vr(std::span<const EnsemblePrediction> predictions);

/// Greedy k-center. Returns column indices into `unlabeled`, in pick order.
std::vector<int> select_coreset_indices(const Eigen::Ref<const Eigen::MatrixXd>& labeled,
                                        const Eigen::Ref<const Eigen::MatrixXd>& unlabeled, int budget);

/// Greedy k-center over unlabeled points; returns their ids in pick order.
std::vector<int> select_coreset(const Eigen::Ref<const Eigen::MatrixXd>& labeled,
                                const Eigen::Ref<const Eigen::MatrixXd>& unlabeled,
                                std::span<const int> unlabeled_ids, int budget);

/// Zeroes the final score of predicted outliers when filtering is on.
std::vector<ScoredExample> apply_filtering(std::vector<ScoredExample> scored, bool filtering);

/// Descending final score; ties resolved by a permutation drawn from `seed`.
std::vector<int> select_top_b(std::span<const ScoredExample> scored, int budget, std::uint64_t seed);

struct Acquisition {
  std::vector<int> acquired;           // A_t in selection order
  std::vector<ScoredExample> scored;   // aligned with pool.unlabeled_ids
  std::vector<EnsemblePrediction> predictions;
};

/// Scores every unlabeled example with `members`, filters, and picks the
/// top-B batch. `outlier_label` is the class index of the outlier output, or
/// -1 when the members have no such output.
Acquisition acquire(const PoolState& pool, const Dataset& data, std::span<const Classifier> members,
                    const AcquisitionConfig& config, int outlier_label, std::uint64_t scorer_seed,
                    std::uint64_t tie_seed);

}  // namespace osal
