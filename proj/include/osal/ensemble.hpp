#pragma once

#include "osal/model.hpp"
#include "osal/pool.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace osal {

struct EnsembleConfig {
  int members = 5;  // M
  bool semi_enabled = true;
  bool weights_enabled = true;
  bool k_plus_one = true;
  double labeled_fraction = 0.5;  // of every semi-supervised batch
  bool shared_init = false;       // all members start from member 0's init
  bool shared_shuffle = false;    // all members see member 0's batch order
  std::uint64_t seed = 0;         // run master seed

  void validate() const;
};

struct EnsemblePrediction {
  Eigen::MatrixXd member_probs;  // classes x M
  Eigen::VectorXd avg_probs;
  int pseudo_label = 0;
  std::vector<int> member_labels;
  double weight = 0.0;
  double vr = 0.0;
};

/// Shannon entropy in nats; entries below 1e-12 contribute nothing.
double entropy(const Eigen::Ref<const Eigen::VectorXd>& probs);

/// 1 - H(p) / log(C), clamped to [0, 1]. A single-class vector has weight 1.
double entropy_weight(const Eigen::Ref<const Eigen::VectorXd>& probs);

/// Fraction of members whose label differs from the ensemble label.
double compute_vr(std::span<const int> member_labels, int ensemble_label);

EnsemblePrediction ensemble_predict(std::span<const Classifier> members, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Column-wise ensemble_predict over a dim x n feature block.
std::vector<EnsemblePrediction> ensemble_predict_batch(std::span<const Classifier> members,
                                                       const Eigen::Ref<const Eigen::MatrixXd>& features);

struct PseudoLabel {
  int label = 0;
  double weight = 0.0;
  double vr = 0.0;
};

using PseudoLabelMap = std::map<int, PseudoLabel>;

/// One entry per unlabeled id.
PseudoLabelMap pseudo_label_pool(std::span<const Classifier> members, const PoolState& pool, const Dataset& data);

/// Continues training on balanced batches: every batch takes
/// round(labeled_fraction * batch_size) labeled rows (cycling through a
/// reshuffled labeled set) and fills the rest from the unlabeled set. One
/// epoch is one pass over the unlabeled set. Optimizer moments start fresh.
Classifier train_semi(Classifier model, const WeightedExamples<double>& labeled,
                      const WeightedExamples<double>& unlabeled, int epochs, int batch_size, double labeled_fraction,
                      std::uint64_t shuffle_seed);

struct RoundModels {
  std::vector<Classifier> supervised;
  std::optional<std::vector<Classifier>> semi;
  PseudoLabelMap pseudo_labels;  // from the supervised ensemble; empty when semi is off
  double supervised_ms = 0.0;
  double semi_ms = 0.0;

  const std::vector<Classifier>& final_members() const { return semi ? *semi : supervised; }
};

/// Classifier shape for a round: input_dim from the data, K+1 or K outputs.
ClassifierConfig round_model_config(const ClassifierConfig& base, const Dataset& data, bool k_plus_one);

std::uint64_t member_init_seed(const EnsembleConfig& config, int member);
std::uint64_t member_shuffle_seed(const EnsembleConfig& config, int round, int stage, int member);

/// Supervised stage on L_t, then (optionally) pseudo-labeling of U_t and the
/// weighted semi-supervised stage on L_t and U_t.
RoundModels train_round(const PoolState& pool, const Dataset& data, const EnsembleConfig& ensemble,
                        const ClassifierConfig& model, int round);

}  // namespace osal
