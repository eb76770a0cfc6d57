// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance <path-to-osal-cli> <path-to-toy.cfg>
//
// Exits non-zero when any criterion fails.

#include "osal/experiment.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

using namespace osal;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o, double seconds) {
  if (!o.pass) ++failures;
  std::printf("criterion %2d: %s  %s (%s) [%.2fs]\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
              seconds);
  std::fflush(stdout);
}

void run(int id, const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (time_limit_s > 0 && s >= time_limit_s) {
    o.pass = false;
    o.detail += "; over the " + format_number(time_limit_s) + "s limit";
  }
  report(id, name, o, s);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << std::fixed << v;
  return ss.str();
}

// Entropy in bits via log2, converted; kept apart from the library code.
double oracle_weight(const Eigen::VectorXd& p) {
  double bits = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) bits -= p[i] * std::log2(p[i]);
  return 1.0 - bits / std::log2(static_cast<double>(p.size()));
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Exact criteria

Outcome weight_oracle() {
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int c = 2 + static_cast<int>(rng.below(9));  // 2..10 outputs
    Eigen::VectorXd p(c);
    for (int j = 0; j < c; ++j) p[j] = -std::log(1.0 - rng.uniform());  // Dirichlet(1)
    // Sparse vectors now and then, to exercise the 0 log 0 convention.
    if (t % 7 == 0) p[static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(c)))] = 0.0;
    p /= p.sum();
    worst = std::max(worst, std::abs(entropy_weight(p) - oracle_weight(p)));
  }
  bool extremes = true;
  for (int c = 2; c <= 10; ++c) {
    extremes &= entropy_weight(Eigen::VectorXd::Constant(c, 1.0 / c)) == 0.0;
    for (int j = 0; j < c; ++j) extremes &= entropy_weight(Eigen::VectorXd::Unit(c, j)) == 1.0;
  }
  return {worst < 1e-9 && extremes,
          "max |w - oracle| = " + format_number(worst) + ", uniform->0 and one-hot->1 " + (extremes ? "exact" : "inexact")};
}

Outcome vr_quantization() {
  Rng rng(202);
  int bad = 0, trials = 0;
  for (int m : {1, 3, 5, 20}) {
    for (int t = 0; t < 500; ++t, ++trials) {
      const int classes = 2 + static_cast<int>(rng.below(5));
      std::vector<int> labels(static_cast<std::size_t>(m));
      for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
      const int ensemble_label = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
      const double scaled = compute_vr(labels, ensemble_label) * m;
      if (std::abs(scaled - std::round(scaled)) > 1e-9 || scaled < -1e-9 || scaled > m + 1e-9) ++bad;
    }
    if (compute_vr(std::vector<int>(static_cast<std::size_t>(m), 1), 1) != 0.0) ++bad;
  }
  // Through real ensembles as well: VR comes from member argmaxes.
  ClassifierConfig c;
  c.input_dim = 3;
  c.num_classes = 4;
  for (int m : {1, 3, 5, 20}) {
    std::vector<Classifier> members;
    for (int i = 0; i < m; ++i) members.push_back(Classifier::init(c, rng.next_u64()));
    Eigen::MatrixXd x(3, 200);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 3.0 * rng.normal();
    for (const auto& p : ensemble_predict_batch(members, x)) {
      ++trials;
      const double scaled = p.vr * m;
      if (std::abs(scaled - std::round(scaled)) > 1e-9 || scaled < -1e-9 || scaled > m + 1e-9) ++bad;
    }
  }
  return {bad == 0, std::to_string(trials) + " label sets, " + std::to_string(bad) + " off-grid"};
}

Outcome gradient_checks() {
  Rng rng(303);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    ClassifierConfig c;
    c.input_dim = 2 + static_cast<int>(rng.below(6));
    c.num_classes = 2 + static_cast<int>(rng.below(6));
    c.hidden.clear();
    for (int h = static_cast<int>(rng.below(3)); h > 0; --h) c.hidden.push_back(2 + static_cast<int>(rng.below(8)));
    c.activation = t % 2 ? Activation::tanh : Activation::elu;
    const auto model = Classifier::init(c, rng.next_u64());
    const int n = 1 + static_cast<int>(rng.below(10));
    WeightedExamples<double> batch;
    batch.features.resize(c.input_dim, n);
    batch.weights.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < c.input_dim; ++j) batch.features(j, i) = rng.normal();
      batch.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(c.num_classes))));
      batch.weights[i] = rng.uniform();
    }
    worst = std::max(worst, gradient_check(model, batch));
  }
  return {worst < 1e-4, "max relative error " + format_number(worst) + " over 50 instances"};
}

Outcome pool_bookkeeping(const ExperimentConfig& toy) {
  ExperimentConfig c = toy;
  c.rounds = 10;
  c.seeds = {0};
  c.validate();
  const auto bench = materialize_benchmark(c, 0);
  const Oracle oracle(bench.data);
  const auto run = run_seed(c, bench, 0);
  for (std::size_t i = 0; i < run.pools.size(); ++i) {
    check_pool_invariants(run.pools[i], bench.initial_pool, c.acquisition.budget, oracle);
    if (i > 0) check_monotone(run.pools[i - 1], run.pools[i]);
  }
  const auto l0 = bench.initial_pool.labeled_ids.size();
  const auto lt = run.pools.back().labeled_ids.size();
  const auto expected = l0 + static_cast<std::size_t>(c.rounds * c.acquisition.budget);
  return {lt == expected, std::to_string(run.pools.size()) + " pools checked, |L_T| = " + std::to_string(lt) +
                              " (expected " + std::to_string(expected) + ")"};
}

double covering_radius(const Eigen::MatrixXd& labeled, const Eigen::MatrixXd& unlabeled, const std::vector<int>& chosen) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < unlabeled.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < labeled.cols(); ++c) best = std::min(best, (unlabeled.col(i) - labeled.col(c)).norm());
    for (int c : chosen) best = std::min(best, (unlabeled.col(i) - unlabeled.col(c)).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

Outcome coreset_oracle() {
  Rng rng(505);
  double worst_ratio = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const int budget = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(3, n))));
    const int nl = static_cast<int>(rng.below(4));
    const int d = 1 + static_cast<int>(rng.below(4));
    Eigen::MatrixXd labeled(d, nl), unlabeled(d, n);
    for (Eigen::Index i = 0; i < labeled.size(); ++i) labeled.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < unlabeled.size(); ++i) unlabeled.data()[i] = 2.0 * rng.normal();

    double optimum = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (std::popcount(mask) != budget) continue;
      std::vector<int> chosen;
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) chosen.push_back(i);
      optimum = std::min(optimum, covering_radius(labeled, unlabeled, chosen));
    }
    const double greedy = covering_radius(labeled, unlabeled, select_coreset_indices(labeled, unlabeled, budget));
    if (greedy > 2.0 * optimum + 1e-12) return {false, "instance " + std::to_string(t) + " exceeds 2x optimum"};
    if (optimum > 0) worst_ratio = std::max(worst_ratio, greedy / optimum);
  }
  return {true, "200 instances, worst greedy/optimal radius " + fmt(worst_ratio, 3)};
}

Outcome filtering_semantics(const ExperimentConfig& toy) {
  const auto bench = materialize_benchmark(toy, 0);
  EnsembleConfig ens = toy.ensemble;
  ens.seed = 0;
  // Round-1 pool: L_0 plus a random batch, so the ensemble has seen outliers.
  const auto zero = run_round_zero(bench.initial_pool, bench, toy, 0);
  const auto models = train_round(zero.pool, bench.data, ens, toy.model, 1);
  const int outlier = bench.data.outlier_label();
  long positives = 0, filtered = 0;
  for (auto scorer : {Scorer::random, Scorer::entropy, Scorer::max_confidence, Scorer::vr, Scorer::coreset}) {
    AcquisitionConfig a = toy.acquisition;
    a.scorer = scorer;
    a.filtering = true;
    const auto on = acquire(zero.pool, bench.data, models.final_members(), a, outlier, 11, 12);
    std::map<int, const ScoredExample*> by_id;
    for (std::size_t i = 0; i < on.scored.size(); ++i) by_id[on.scored[i].id] = &on.scored[i];
    for (std::size_t i = 0; i < on.scored.size(); ++i) filtered += on.scored[i].predicted_outlier;
    for (int id : on.acquired) {
      const auto& s = *by_id.at(id);
      if (s.final_score <= 0.0) continue;
      ++positives;
      const auto idx = static_cast<std::size_t>(&s - on.scored.data());
      if (on.predictions[idx].pseudo_label == outlier)
        return {false, std::string(to_string(scorer)) + " acquired a predicted outlier with a positive score"};
    }
    a.filtering = false;
    const auto off = acquire(zero.pool, bench.data, models.final_members(), a, outlier, 11, 12);
    for (const auto& s : off.scored)
      if (s.final_score != s.raw_score) return {false, std::string(to_string(scorer)) + ": final != raw without filtering"};
  }
  return {true, std::to_string(positives) + " positive-score picks, none pseudo-labeled outlier; " +
                    std::to_string(filtered) + " predicted outliers seen over 5 scorers"};
}

Outcome cli_determinism(const std::string& cli, const std::string& config) {
  const auto root = std::filesystem::current_path() / "acceptance_determinism";
  std::filesystem::remove_all(root);
  for (const char* name : {"a", "b"}) {
    const std::string cmd = "\"" + cli + "\" run --config \"" + config + "\" --seed 7 --out \"" + (root / name).string() +
                            "\" > \"" + (root.string() + "_" + name + ".log") + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "cli run failed: " + cmd};
  }
  const auto a = read_file(root / "a" / "metrics.csv");
  const auto b = read_file(root / "b" / "metrics.csv");
  const bool same = !a.empty() && a == b && read_file(root / "a" / "acquired.csv") == read_file(root / "b" / "acquired.csv");
  return {same, "metrics.csv " + std::to_string(a.size()) + " bytes, " + (same ? "identical" : "different")};
}

// ---------------------------------------------------------------------------
// Directional criteria on the toy benchmark

struct Table {
  // variant -> seed -> round -> record
  std::map<std::string, std::map<std::uint64_t, std::map<int, RoundRecord>>> rows;

  const RoundRecord& at(const std::string& v, std::uint64_t s, int r) const { return rows.at(v).at(s).at(r); }

  double mean_inlier_rate(const std::string& v, std::uint64_t s, int from, int to) const {
    double sum = 0.0;
    int n = 0;
    for (int r = from; r <= to; ++r) {
      const auto& rec = at(v, s, r);
      if (rec.inlier_rate) {
        sum += *rec.inlier_rate;
        ++n;
      }
    }
    return n ? sum / n : 0.0;
  }
};

Table run_matrix(const ConfigMap& base, const std::vector<Axis>& axes) {
  Table t;
  for (auto& r : run_variant_matrix(base, axes).records) t.rows[r.variant][r.seed][r.round] = r;
  return t;
}

Outcome semi_gain(const ConfigMap& base, const ExperimentConfig& toy) {
  const auto t = run_matrix(base, {parse_axis("ensemble.semi=on,off")});
  int wins = 0;
  double diff = 0.0;
  for (auto s : toy.seeds) {
    const double d = t.at("semi=on", s, toy.rounds).test_accuracy - t.at("semi=off", s, toy.rounds).test_accuracy;
    wins += d > 0.0;
    diff += d;
  }
  const int n = static_cast<int>(toy.seeds.size());
  const int need = n - 1;
  return {wins >= need && diff > 0.0, "semi on beats off in " + std::to_string(wins) + "/" + std::to_string(n) +
                                          " seeds, mean diff " + fmt(diff / n)};
}

Outcome joint_training(const ConfigMap& base, const ExperimentConfig& toy) {
  ConfigMap m = base;
  m["acquisition.scorer"] = "vr";
  m["acquisition.filtering"] = "off";
  const auto t = run_matrix(m, {parse_axis("ensemble.k_plus_one=on,off")});
  int acc_wins = 0, rate_wins = 0;
  double acc_d = 0.0, rate_d = 0.0;
  for (auto s : toy.seeds) {
    const double da =
        t.at("k_plus_one=on", s, toy.rounds).test_accuracy - t.at("k_plus_one=off", s, toy.rounds).test_accuracy;
    const double dr = t.mean_inlier_rate("k_plus_one=on", s, 1, toy.rounds - 1) -
                      t.mean_inlier_rate("k_plus_one=off", s, 1, toy.rounds - 1);
    acc_wins += da > 0.0;
    rate_wins += dr > 0.0;
    acc_d += da;
    rate_d += dr;
  }
  const int n = static_cast<int>(toy.seeds.size());
  return {acc_wins >= n - 1 && rate_wins >= n - 1,
          "K+1 beats K-way on accuracy in " + std::to_string(acc_wins) + "/" + std::to_string(n) + " (mean " +
              fmt(acc_d / n) + "), on inlier rate in " + std::to_string(rate_wins) + "/" + std::to_string(n) +
              " (mean " + fmt(rate_d / n) + ")"};
}

Outcome filtering_gain(const ConfigMap& base, const ExperimentConfig& toy) {
  const auto t =
      run_matrix(base, {parse_axis("acquisition.scorer=random,vr"), parse_axis("acquisition.filtering=on,off")});
  auto gain = [&](const std::string& scorer) {
    double g = 0.0;
    for (auto s : toy.seeds)
      g += t.mean_inlier_rate("scorer=" + scorer + "+filtering=on", s, 1, toy.rounds - 1) -
           t.mean_inlier_rate("scorer=" + scorer + "+filtering=off", s, 1, toy.rounds - 1);
    return g / static_cast<double>(toy.seeds.size());
  };
  const double random = gain("random"), vr = gain("vr");
  return {random > vr, "inlier-rate gain from filtering: random " + fmt(random) + ", vr " + fmt(vr)};
}

Outcome ensemble_size(const ConfigMap& base, const ExperimentConfig& toy) {
  const auto t = run_matrix(base, {parse_axis("ensemble.M=1,3,5")});
  int v53 = 0, v31 = 0;
  double m1 = 0, m3 = 0, m5 = 0;
  for (auto s : toy.seeds) {
    const double p1 = *t.at("M=1", s, toy.rounds).pseudo_label_accuracy;
    const double p3 = *t.at("M=3", s, toy.rounds).pseudo_label_accuracy;
    const double p5 = *t.at("M=5", s, toy.rounds).pseudo_label_accuracy;
    v53 += p5 < p3;
    v31 += p3 < p1;
    m1 += p1;
    m3 += p3;
    m5 += p5;
  }
  const double n = static_cast<double>(toy.seeds.size());
  return {v53 <= 1 && v31 <= 1 && m5 >= m3 && m3 >= m1,
          "final pseudo-label accuracy M=1 " + fmt(m1 / n) + ", M=3 " + fmt(m3 / n) + ", M=5 " + fmt(m5 / n) +
              "; violations 5<3: " + std::to_string(v53) + ", 3<1: " + std::to_string(v31)};
}

Outcome round_zero_rate(const ExperimentConfig& toy) {
  double sum = 0.0;
  for (auto s : toy.seeds) {
    const auto bench = materialize_benchmark(toy, s);
    sum += *run_round_zero(bench.initial_pool, bench, toy, s).record.inlier_rate;
  }
  const double mean = sum / static_cast<double>(toy.seeds.size());
  const double ratio = toy.benchmark->outlier_ratio.value_or(0.0);
  return {std::abs(mean - (1.0 - ratio)) <= 0.05,
          "mean round-0 inlier rate " + fmt(mean) + " vs expected " + fmt(1.0 - ratio)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <osal-cli> <toy.cfg>\n";
    return 2;
  }
  const std::string cli = argv[1], config_path = argv[2];
  const ConfigMap base = load_config_file(config_path);
  const ExperimentConfig toy = experiment_config_from_map(base);
  if (!toy.benchmark) {
    std::cerr << "acceptance: the toy config must describe a synthetic benchmark\n";
    return 2;
  }

  run(1, "entropy weight vs independent oracle", 1.0, weight_oracle);
  run(2, "VR quantization", 1.0, vr_quantization);
  run(3, "analytic vs finite-difference gradients", 10.0, gradient_checks);
  run(4, "pool bookkeeping over 10 rounds", 0.0, [&] { return pool_bookkeeping(toy); });
  run(5, "greedy k-center within 2x optimal radius", 30.0, coreset_oracle);
  run(6, "filtering semantics", 0.0, [&] { return filtering_semantics(toy); });
  run(7, "CLI determinism", 0.0, [&] { return cli_determinism(cli, config_path); });
  run(8, "semi-supervision gain at the final round", 0.0, [&] { return semi_gain(base, toy); });
  run(9, "joint K+1 training beats K-way", 0.0, [&] { return joint_training(base, toy); });
  run(10, "filtering helps random more than VR", 0.0, [&] { return filtering_gain(base, toy); });
  run(11, "pseudo-label accuracy rises with M", 0.0, [&] { return ensemble_size(base, toy); });
  run(12, "round-0 random inlier rate", 0.0, [&] { return round_zero_rate(toy); });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
