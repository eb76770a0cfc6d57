#include "osal/acquisition.hpp"

#include "osal/random.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace osal {

Scorer parse_scorer(std::string_view name) {
  if (name == "random") return Scorer::random;
  if (name == "entropy") return Scorer::entropy;
  if (name == "max_confidence") return Scorer::max_confidence;
  if (name == "vr") return Scorer::vr;
  if (name == "coreset") return Scorer::coreset;
  throw std::invalid_argument("unknown scorer '" + std::string(name) + "'");
}

const char* to_string(Scorer s) {
  switch (s) {
    case Scorer::random: return "random";
    case Scorer::entropy: return "entropy";
    case Scorer::max_confidence: return "max_confidence";
    case Scorer::vr: return "vr";
    case Scorer::coreset: return "coreset";
  }
  return "?";
}

AcquisitionTiming parse_timing(std::string_view name) {
  if (name == "before_semi") return AcquisitionTiming::before_semi;
  if (name == "after_semi") return AcquisitionTiming::after_semi;
  throw std::invalid_argument("unknown acquisition timing '" + std::string(name) + "'");
}

const char* to_string(AcquisitionTiming t) {
  return t == AcquisitionTiming::before_semi ? "before_semi" : "after_semi";
}

std::vector<double> score_random(std::span<const int> ids, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(ids.size());
  for (auto& s : out) s = rng.uniform();
  return out;
}

std::vector<double> score_entropy(std::span<const EnsemblePrediction> predictions) {
  std::vector<double> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(entropy(p.avg_probs));
  return out;
}

std::vector<double> score_max_confidence(std::span<const EnsemblePrediction> predictions) {
  std::vector<double> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(1.0 - p.avg_probs.maxCoeff());
  return out;
}

std::vector<double> score_vr(std::span<const EnsemblePrediction> predictions) {
  std::vector<double> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(compute_vr(p.member_labels, p.pseudo_label));
  return out;
}

std::vector<int> select_coreset_indices(const Eigen::Ref<const Eigen::MatrixXd>& labeled,
                                        const Eigen::Ref<const Eigen::MatrixXd>& unlabeled, int budget) {
  const Eigen::Index n = unlabeled.cols();
  if (budget < 0 || budget > n) throw std::invalid_argument("coreset: budget exceeds the unlabeled pool");
  if (labeled.cols() > 0 && labeled.rows() != unlabeled.rows())
    throw std::invalid_argument("coreset: feature dimensions differ");

  // Squared distance from every unlabeled point to its nearest center.
  Eigen::VectorXd nearest = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (Eigen::Index c = 0; c < labeled.cols(); ++c)
    nearest = nearest.cwiseMin((unlabeled.colwise() - labeled.col(c)).colwise().squaredNorm().transpose());

  std::vector<int> picks;
  picks.reserve(static_cast<std::size_t>(budget));
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  for (int b = 0; b < budget; ++b) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || nearest[i] > nearest[best]) best = i;
    }
    taken[static_cast<std::size_t>(best)] = true;
    picks.push_back(static_cast<int>(best));
    nearest = nearest.cwiseMin((unlabeled.colwise() - unlabeled.col(best)).colwise().squaredNorm().transpose());
  }
  return picks;
}

std::vector<int> select_coreset(const Eigen::Ref<const Eigen::MatrixXd>& labeled,
                                const Eigen::Ref<const Eigen::MatrixXd>& unlabeled,
                                std::span<const int> unlabeled_ids, int budget) {
  if (static_cast<Eigen::Index>(unlabeled_ids.size()) != unlabeled.cols())
    throw std::invalid_argument("coreset: ids and features disagree in length");
  std::vector<int> ids;
  for (int i : select_coreset_indices(labeled, unlabeled, budget)) ids.push_back(unlabeled_ids[static_cast<std::size_t>(i)]);
  return ids;
}

std::vector<ScoredExample> apply_filtering(std::vector<ScoredExample> scored, bool filtering) {
  for (auto& s : scored) s.final_score = (filtering && s.predicted_outlier) ? 0.0 : s.raw_score;
  return scored;
}

std::vector<int> select_top_b(std::span<const ScoredExample> scored, int budget, std::uint64_t seed) {
  if (budget < 0 || static_cast<std::size_t>(budget) > scored.size())
    throw std::invalid_argument("select_top_b: budget exceeds the number of scored examples");
  Rng rng(seed);
  const auto perm = rng.permutation(scored.size());
  std::vector<std::size_t> tie_rank(scored.size());
  for (std::size_t i = 0; i < perm.size(); ++i) tie_rank[perm[i]] = i;

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + budget, order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].final_score != scored[b].final_score) return scored[a].final_score > scored[b].final_score;
    return tie_rank[a] < tie_rank[b];
  });
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(budget));
  for (int i = 0; i < budget; ++i) ids.push_back(scored[order[static_cast<std::size_t>(i)]].id);
  return ids;
}

namespace {

Eigen::MatrixXd gather(const Dataset& data, std::span<const int> ids) {
  Eigen::MatrixXd x(data.dim(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = data.features.col(ids[i]);
  return x;
}

Eigen::MatrixXd embed(std::span<const Classifier> members, const Eigen::MatrixXd& x, bool average) {
  if (!average) return members[0].penultimate(x);
  Eigen::MatrixXd sum = members[0].penultimate(x);
  for (std::size_t i = 1; i < members.size(); ++i) sum += members[i].penultimate(x);
  return sum / static_cast<double>(members.size());
}

}  // namespace

Acquisition acquire(const PoolState& pool, const Dataset& data, std::span<const Classifier> members,
                    const AcquisitionConfig& config, int outlier_label, std::uint64_t scorer_seed,
                    std::uint64_t tie_seed) {
  const auto& ids = pool.unlabeled_ids;
  if (config.budget > static_cast<int>(ids.size()))
    throw std::invalid_argument("acquire: budget exceeds the unlabeled pool");

  Acquisition out;
  const Eigen::MatrixXd x = gather(data, ids);
  out.predictions = ensemble_predict_batch(members, x);

  out.scored.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.scored[i].id = ids[i];
    out.scored[i].predicted_outlier = outlier_label >= 0 && out.predictions[i].pseudo_label == outlier_label;
  }

  std::vector<double> raw;
  switch (config.scorer) {
    case Scorer::random: raw = score_random(ids, scorer_seed); break;
    case Scorer::entropy: raw = score_entropy(out.predictions); break;
    case Scorer::max_confidence: raw = score_max_confidence(out.predictions); break;
    case Scorer::vr: raw = score_vr(out.predictions); break;
    case Scorer::coreset: {
      // Selection-based: greedy picks get descending positive scores. With
      // filtering, predicted outliers are not candidates.
      std::vector<int> candidates;
      for (std::size_t i = 0; i < ids.size(); ++i)
        if (!(config.filtering && out.scored[i].predicted_outlier)) candidates.push_back(static_cast<int>(i));
      Eigen::MatrixXd cand_x(data.dim(), static_cast<Eigen::Index>(candidates.size()));
      for (std::size_t c = 0; c < candidates.size(); ++c) cand_x.col(static_cast<Eigen::Index>(c)) = x.col(candidates[c]);
      const Eigen::MatrixXd labeled = embed(members, gather(data, pool.labeled_ids), config.coreset_average_features);
      const Eigen::MatrixXd unlabeled = embed(members, cand_x, config.coreset_average_features);
      const int b = std::min(config.budget, static_cast<int>(candidates.size()));
      raw.assign(ids.size(), 0.0);
      const auto picks = select_coreset_indices(labeled, unlabeled, b);
      for (std::size_t r = 0; r < picks.size(); ++r)
        raw[static_cast<std::size_t>(candidates[static_cast<std::size_t>(picks[r])])] =
            static_cast<double>(b - static_cast<int>(r)) / b;
      break;
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i) out.scored[i].raw_score = raw[i];
  out.scored = apply_filtering(std::move(out.scored), config.filtering);
  out.acquired = select_top_b(out.scored, config.budget, tie_seed);
  return out;
}

}  // namespace osal
