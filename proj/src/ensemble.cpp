#include "osal/ensemble.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace osal {

void EnsembleConfig::validate() const {
  if (members < 1) throw std::invalid_argument("ensemble: M must be at least 1");
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
    throw std::invalid_argument("ensemble: labeled_fraction must lie in (0, 1]");
}

double entropy(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    const double p = probs[j];
    if (p > 1e-12) h -= p * std::log(p);
  }
  return h;
}

double entropy_weight(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  if (probs.size() <= 1) return 1.0;
  // 1 - H/log(C) written as KL(p || uniform) / log(C): the uniform vector
  // then gives log(1) = 0 per term instead of a rounding residue.
  const double c = static_cast<double>(probs.size());
  double kl = 0.0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    const double p = probs[j];
    if (p > 1e-12) kl += p * std::log(p * c);
  }
  return std::clamp(kl / std::log(c), 0.0, 1.0);
}

double compute_vr(std::span<const int> member_labels, int ensemble_label) {
  if (member_labels.empty()) throw std::invalid_argument("compute_vr: no members");
  const auto agree = std::count(member_labels.begin(), member_labels.end(), ensemble_label);
  return 1.0 - static_cast<double>(agree) / static_cast<double>(member_labels.size());
}

namespace {

void check_members(std::span<const Classifier> members) {
  if (members.empty()) throw std::invalid_argument("ensemble: no members");
  for (const auto& m : members) {
    if (m.num_classes() != members[0].num_classes() || m.input_dim() != members[0].input_dim())
      throw std::invalid_argument("ensemble: members disagree in shape");
  }
}

}  // namespace

std::vector<EnsemblePrediction> ensemble_predict_batch(std::span<const Classifier> members,
                                                       const Eigen::Ref<const Eigen::MatrixXd>& features) {
  check_members(members);
  const auto m = static_cast<Eigen::Index>(members.size());
  const Eigen::Index n = features.cols();
  const int classes = members[0].num_classes();

  std::vector<Eigen::MatrixXd> probs;
  probs.reserve(members.size());
  for (const auto& member : members) probs.push_back(member.predict_batch(features));

  std::vector<EnsemblePrediction> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& p = out[static_cast<std::size_t>(i)];
    p.member_probs.resize(classes, m);
    p.member_labels.resize(members.size());
    for (Eigen::Index k = 0; k < m; ++k) {
      p.member_probs.col(k) = probs[static_cast<std::size_t>(k)].col(i);
      p.member_labels[static_cast<std::size_t>(k)] = argmax(p.member_probs.col(k));
    }
    p.avg_probs = p.member_probs.rowwise().mean();
    p.pseudo_label = argmax(p.avg_probs);
    p.weight = entropy_weight(p.avg_probs);
    p.vr = compute_vr(p.member_labels, p.pseudo_label);
  }
  return out;
}

EnsemblePrediction ensemble_predict(std::span<const Classifier> members, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::move(ensemble_predict_batch(members, x).front());
}

PseudoLabelMap pseudo_label_pool(std::span<const Classifier> members, const PoolState& pool, const Dataset& data) {
  PseudoLabelMap out;
  if (pool.unlabeled_ids.empty()) return out;
  Eigen::MatrixXd x(data.dim(), static_cast<Eigen::Index>(pool.unlabeled_ids.size()));
  for (std::size_t i = 0; i < pool.unlabeled_ids.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) = data.features.col(pool.unlabeled_ids[i]);
  const auto preds = ensemble_predict_batch(members, x);
  for (std::size_t i = 0; i < preds.size(); ++i)
    out.emplace(pool.unlabeled_ids[i], PseudoLabel{preds[i].pseudo_label, preds[i].weight, preds[i].vr});
  return out;
}

Classifier train_semi(Classifier model, const WeightedExamples<double>& labeled,
                      const WeightedExamples<double>& unlabeled, int epochs, int batch_size, double labeled_fraction,
                      std::uint64_t shuffle_seed) {
  labeled.validate(model.num_classes(), model.input_dim());
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("train_semi: epochs and batch size must be positive");
  const int n_lab = std::clamp(static_cast<int>(std::lround(labeled_fraction * batch_size)), 1, batch_size);
  const int n_unl = batch_size - n_lab;
  if (unlabeled.size() == 0 || n_unl == 0) return train_weighted(std::move(model), labeled, epochs, batch_size, shuffle_seed);
  unlabeled.validate(model.num_classes(), model.input_dim());

  Trainer<double> trainer(model, model.config().optimizer, model.config().learning_rate);
  Rng rng(shuffle_seed);
  const auto nl = static_cast<std::size_t>(labeled.size());
  const auto nu = static_cast<std::size_t>(unlabeled.size());
  auto lab_order = rng.permutation(nl);
  std::size_t lab_pos = 0;

  Eigen::MatrixXd x(model.input_dim(), batch_size);
  Eigen::VectorXd w(batch_size);
  std::vector<int> y(static_cast<std::size_t>(batch_size));
  for (int e = 0; e < epochs; ++e) {
    const auto unl_order = rng.permutation(nu);
    for (std::size_t start = 0; start < nu; start += static_cast<std::size_t>(n_unl)) {
      const auto count_u = std::min(nu - start, static_cast<std::size_t>(n_unl));
      const auto rows = static_cast<Eigen::Index>(static_cast<std::size_t>(n_lab) + count_u);
      x.conservativeResize(Eigen::NoChange, rows);
      w.conservativeResize(rows);
      y.resize(static_cast<std::size_t>(rows));
      Eigen::Index r = 0;
      for (int i = 0; i < n_lab; ++i, ++r) {
        if (lab_pos == nl) {
          lab_order = rng.permutation(nl);
          lab_pos = 0;
        }
        const auto src = static_cast<Eigen::Index>(lab_order[lab_pos++]);
        x.col(r) = labeled.features.col(src);
        w[r] = labeled.weights[src];
        y[static_cast<std::size_t>(r)] = labeled.labels[static_cast<std::size_t>(src)];
      }
      for (std::size_t i = 0; i < count_u; ++i, ++r) {
        const auto src = static_cast<Eigen::Index>(unl_order[start + i]);
        x.col(r) = unlabeled.features.col(src);
        w[r] = unlabeled.weights[src];
        y[static_cast<std::size_t>(r)] = unlabeled.labels[static_cast<std::size_t>(src)];
      }
      trainer.step(x, y, w, static_cast<double>(batch_size));
    }
  }
  return model;
}

ClassifierConfig round_model_config(const ClassifierConfig& base, const Dataset& data, bool k_plus_one) {
  ClassifierConfig c = base;
  c.input_dim = data.dim();
  c.num_classes = data.num_inlier_classes + (k_plus_one ? 1 : 0);
  return c;
}

std::uint64_t member_init_seed(const EnsembleConfig& config, int member) {
  return derive_seed(config.seed, SeedStream::member_init, config.shared_init ? 0 : static_cast<std::uint64_t>(member));
}

std::uint64_t member_shuffle_seed(const EnsembleConfig& config, int round, int stage, int member) {
  const std::uint64_t m = config.shared_shuffle ? 0 : static_cast<std::uint64_t>(member);
  return derive_seed(config.seed, SeedStream::shuffle,
                     ((static_cast<std::uint64_t>(round) * 2 + static_cast<std::uint64_t>(stage)) << 20) + m);
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

RoundModels train_round(const PoolState& pool, const Dataset& data, const EnsembleConfig& ensemble,
                        const ClassifierConfig& model, int round) {
  ensemble.validate();
  if (round < 1) throw std::invalid_argument("train_round: round 0 trains no K+1-way ensemble");
  const ClassifierConfig config = round_model_config(model, data, ensemble.k_plus_one);
  config.validate();
  const int outlier = data.outlier_label();

  // Revealed labels only. The K-way variant drops labeled outliers.
  WeightedExamples<double> labeled;
  {
    std::vector<int> ids;
    for (int id : pool.labeled_ids) {
      const int y = pool.revealed_labels.at(id);
      if (!ensemble.k_plus_one && y == outlier) continue;
      ids.push_back(id);
    }
    if (ids.empty()) throw std::invalid_argument("train_round: no usable labeled examples");
    labeled.features.resize(data.dim(), static_cast<Eigen::Index>(ids.size()));
    labeled.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      labeled.features.col(static_cast<Eigen::Index>(i)) = data.features.col(ids[i]);
      labeled.labels.push_back(pool.revealed_labels.at(ids[i]));
    }
  }

  RoundModels out;
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < ensemble.members; ++i) {
    auto init = Classifier::init(config, member_init_seed(ensemble, i));
    out.supervised.push_back(train_weighted(std::move(init), labeled, config.epochs_supervised, config.batch_size,
                                            member_shuffle_seed(ensemble, round, 0, i)));
  }
  out.supervised_ms = elapsed_ms(t0);
  if (!ensemble.semi_enabled) return out;

  t0 = std::chrono::steady_clock::now();
  out.pseudo_labels = pseudo_label_pool(out.supervised, pool, data);
  WeightedExamples<double> unlabeled;
  {
    std::vector<std::pair<int, PseudoLabel>> kept;
    for (const auto& [id, pl] : out.pseudo_labels) {
      if (!ensemble.k_plus_one && pl.label == outlier) continue;
      kept.emplace_back(id, pl);
    }
    unlabeled.features.resize(data.dim(), static_cast<Eigen::Index>(kept.size()));
    unlabeled.weights.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      unlabeled.features.col(c) = data.features.col(kept[i].first);
      unlabeled.weights[c] = ensemble.weights_enabled ? kept[i].second.weight : 1.0;
      unlabeled.labels.push_back(kept[i].second.label);
    }
  }

  std::vector<Classifier> semi;
  for (int i = 0; i < ensemble.members; ++i) {
    semi.push_back(train_semi(out.supervised[static_cast<std::size_t>(i)], labeled, unlabeled, config.epochs_semi,
                              config.semi_batch_size, ensemble.labeled_fraction,
                              member_shuffle_seed(ensemble, round, 1, i)));
  }
  out.semi = std::move(semi);
  out.semi_ms = elapsed_ms(t0);
  return out;
}

}  // namespace osal
