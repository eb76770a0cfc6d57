#include "osal/experiment.hpp"

#include "osal/random.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace osal {

// ---------------------------------------------------------------------------
// Key/value text

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s, char delim = ',') {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.push_back(trim(std::string_view(s).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw std::runtime_error("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    out[section.empty() ? key : section + "." + key] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(ConfigMap& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "' is not key=value");
  const auto key = trim(std::string_view(assignment).substr(0, eq));
  if (key.empty()) throw std::invalid_argument("override '" + assignment + "' has an empty key");
  config[key] = trim(std::string_view(assignment).substr(eq + 1));
}

std::string format_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) out += k + " = " + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Typed access

namespace {

class Reader {
 public:
  explicit Reader(const ConfigMap& m) : map_(m) {}

  const std::string* find(const std::string& key) {
    const auto it = map_.find(key);
    if (it == map_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  bool has_prefix(const std::string& prefix) const {
    return std::any_of(map_.begin(), map_.end(), [&](const auto& kv) { return kv.first.rfind(prefix, 0) == 0; });
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const auto* v = find(key)) out = parse<T>(key, *v);
  }

  void finish() const {
    for (const auto& [k, v] : map_)
      if (!used_.contains(k)) throw std::invalid_argument("unknown config key '" + k + "'");
  }

  template <typename T>
  static T parse(const std::string& key, const std::string& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
      if (v == "off" || v == "false" || v == "0" || v == "no") return false;
      throw std::invalid_argument(key + ": expected a boolean, got '" + v + "'");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_arithmetic_v<T>) {
      T out{};
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc{} || p != v.data() + v.size())
        throw std::invalid_argument(key + ": cannot parse '" + v + "'");
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  const ConfigMap& map_;
  std::set<std::string> used_;
};

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(Reader::parse<T>(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += format_number(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

std::string on_off(bool b) { return b ? "on" : "off"; }

void read_benchmark(Reader& r, BenchmarkSpec& s, const std::string& p) {
  r.get(p + "num_classes", s.num_classes);
  r.get(p + "dim", s.dim);
  r.get(p + "inlier_mean_scale", s.inlier_mean_scale);
  r.get(p + "inlier_stddev", s.inlier_stddev);
  r.get(p + "outlier_clusters", s.outlier_clusters);
  r.get(p + "outlier_mean_scale", s.outlier_mean_scale);
  r.get(p + "outlier_stddev", s.outlier_stddev);
  r.get(p + "outlier_min_separation", s.outlier_min_separation);
  r.get(p + "n_inlier_per_class", s.n_inlier_per_class);
  r.get(p + "n_outlier", s.n_outlier);
  if (const auto* v = r.find(p + "outlier_ratio")) {
    if (*v == "none" || v->empty())
      s.outlier_ratio.reset();
    else
      s.outlier_ratio = Reader::parse<double>(p + "outlier_ratio", *v);
  }
  r.get(p + "initial_labeled_per_class", s.initial_labeled_per_class);
  r.get(p + "test_per_class", s.test_per_class);
  r.get(p + "seed", s.seed);
}

std::vector<double> read_doubles(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open warm start " + path.string());
  std::vector<double> out;
  std::string tok;
  while (f >> tok) out.push_back(Reader::parse<double>("model.warm_start", tok));
  return out;
}

}  // namespace

BenchmarkSpec benchmark_spec_from_map(const ConfigMap& config) {
  // Accepts both bare keys and benchmark.* keys.
  ConfigMap stripped;
  for (const auto& [k, v] : config) stripped[k.rfind("benchmark.", 0) == 0 ? k.substr(10) : k] = v;
  Reader r(stripped);
  BenchmarkSpec spec;
  read_benchmark(r, spec, "");
  r.finish();
  spec.validate();
  return spec;
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("experiment: rounds must be at least 1");
  if (seeds.empty()) throw std::invalid_argument("experiment: seeds must be non-empty");
  if (acquisition.budget < 1) throw std::invalid_argument("acquisition: budget must be positive");
  if (benchmark && !dataset_path.empty()) throw std::invalid_argument("experiment: both benchmark and dataset.path given");
  if (!benchmark && dataset_path.empty()) throw std::invalid_argument("experiment: no data source");
  if (benchmark) {
    benchmark->validate();
    const long unlabeled = static_cast<long>(benchmark->num_classes) * benchmark->n_inlier_per_class +
                           benchmark->resolved_outlier_count();
    if (static_cast<long>(acquisition.budget) * rounds > unlabeled)
      throw std::invalid_argument("experiment: budget * rounds exceeds the unlabeled pool");
  }
  ensemble.validate();
}

ExperimentConfig experiment_config_from_map(const ConfigMap& config) {
  Reader r(config);
  ExperimentConfig c;

  if (const auto* v = r.find("dataset.path")) c.dataset_path = *v;
  r.get("dataset.num_inlier_classes", c.dataset_schema.num_inlier_classes);
  if (const auto* v = r.find("dataset.delimiter")) {
    if (*v == "tab")
      c.dataset_schema.delimiter = '\t';
    else if (v->size() == 1)
      c.dataset_schema.delimiter = v->front();
    else
      throw std::invalid_argument("dataset.delimiter must be one character or 'tab'");
  }
  if (r.has_prefix("benchmark.") || c.dataset_path.empty()) {
    c.benchmark = BenchmarkSpec{};
    read_benchmark(r, *c.benchmark, "benchmark.");
  }

  r.get("experiment.rounds", c.rounds);
  if (const auto* v = r.find("experiment.seeds")) c.seeds = parse_list<std::uint64_t>("experiment.seeds", *v);
  r.get("experiment.variant", c.variant);
  if (const auto* v = r.find("experiment.output_dir")) c.output_dir = *v;
  r.get("experiment.dump_predictions", c.dump_predictions);
  r.get("experiment.record_wall_time", c.record_wall_time);
  r.get("experiment.count_outlier_as_error", c.count_outlier_as_error);

  auto& m = c.model;
  if (const auto* v = r.find("model.hidden")) m.hidden = (*v == "none") ? std::vector<int>{} : parse_list<int>("model.hidden", *v);
  r.get("model.learning_rate", m.learning_rate);
  if (const auto* v = r.find("model.optimizer")) {
    if (*v == "sgd") m.optimizer = OptimizerKind::sgd;
    else if (*v == "adam") m.optimizer = OptimizerKind::adam;
    else throw std::invalid_argument("model.optimizer must be sgd or adam");
  }
  if (const auto* v = r.find("model.activation")) {
    if (*v == "relu") m.activation = Activation::relu;
    else if (*v == "elu") m.activation = Activation::elu;
    else if (*v == "tanh") m.activation = Activation::tanh;
    else throw std::invalid_argument("model.activation must be relu, elu or tanh");
  }
  r.get("model.batch_size", m.batch_size);
  r.get("model.semi_batch_size", m.semi_batch_size);
  r.get("model.epochs_supervised", m.epochs_supervised);
  r.get("model.epochs_semi", m.epochs_semi);
  if (const auto* v = r.find("model.warm_start"); v && !v->empty()) {
    c.warm_start_path = *v;
    m.warm_start = read_doubles(c.warm_start_path);
  }

  auto& e = c.ensemble;
  r.get("ensemble.M", e.members);
  r.get("ensemble.semi", e.semi_enabled);
  r.get("ensemble.weights", e.weights_enabled);
  r.get("ensemble.k_plus_one", e.k_plus_one);
  r.get("ensemble.labeled_fraction", e.labeled_fraction);
  r.get("ensemble.shared_init", e.shared_init);
  r.get("ensemble.shared_shuffle", e.shared_shuffle);

  auto& a = c.acquisition;
  if (const auto* v = r.find("acquisition.scorer")) a.scorer = parse_scorer(*v);
  r.get("acquisition.filtering", a.filtering);
  r.get("acquisition.budget", a.budget);
  if (const auto* v = r.find("acquisition.timing")) a.timing = parse_timing(*v);
  r.get("acquisition.coreset_average_features", a.coreset_average_features);

  r.finish();
  if (!c.dataset_path.empty() && c.dataset_schema.num_inlier_classes < 1)
    throw std::invalid_argument("dataset.num_inlier_classes is required with dataset.path");
  c.validate();
  return c;
}

ConfigMap experiment_config_to_map(const ExperimentConfig& c) {
  ConfigMap m;
  if (c.benchmark) {
    const auto& b = *c.benchmark;
    m["benchmark.num_classes"] = std::to_string(b.num_classes);
    m["benchmark.dim"] = std::to_string(b.dim);
    m["benchmark.inlier_mean_scale"] = format_number(b.inlier_mean_scale);
    m["benchmark.inlier_stddev"] = format_number(b.inlier_stddev);
    m["benchmark.outlier_clusters"] = std::to_string(b.outlier_clusters);
    m["benchmark.outlier_mean_scale"] = format_number(b.outlier_mean_scale);
    m["benchmark.outlier_stddev"] = format_number(b.outlier_stddev);
    m["benchmark.outlier_min_separation"] = format_number(b.outlier_min_separation);
    m["benchmark.n_inlier_per_class"] = std::to_string(b.n_inlier_per_class);
    m["benchmark.n_outlier"] = std::to_string(b.resolved_outlier_count());
    m["benchmark.outlier_ratio"] = b.outlier_ratio ? format_number(*b.outlier_ratio) : "none";
    m["benchmark.initial_labeled_per_class"] = std::to_string(b.initial_labeled_per_class);
    m["benchmark.test_per_class"] = std::to_string(b.test_per_class);
    m["benchmark.seed"] = std::to_string(b.seed);
  } else {
    m["dataset.path"] = c.dataset_path.string();
    m["dataset.num_inlier_classes"] = std::to_string(c.dataset_schema.num_inlier_classes);
    m["dataset.delimiter"] = c.dataset_schema.delimiter == '\t' ? "tab" : std::string(1, c.dataset_schema.delimiter);
  }
  m["experiment.rounds"] = std::to_string(c.rounds);
  m["experiment.seeds"] = join(c.seeds);
  m["experiment.variant"] = c.variant;
  m["experiment.output_dir"] = c.output_dir.string();
  m["experiment.dump_predictions"] = on_off(c.dump_predictions);
  m["experiment.record_wall_time"] = on_off(c.record_wall_time);
  m["experiment.count_outlier_as_error"] = on_off(c.count_outlier_as_error);
  m["model.hidden"] = c.model.hidden.empty() ? "none" : join(c.model.hidden);
  m["model.learning_rate"] = format_number(c.model.learning_rate);
  m["model.optimizer"] = to_string(c.model.optimizer);
  m["model.activation"] = to_string(c.model.activation);
  m["model.batch_size"] = std::to_string(c.model.batch_size);
  m["model.semi_batch_size"] = std::to_string(c.model.semi_batch_size);
  m["model.epochs_supervised"] = std::to_string(c.model.epochs_supervised);
  m["model.epochs_semi"] = std::to_string(c.model.epochs_semi);
  m["model.warm_start"] = c.warm_start_path.string();
  m["ensemble.M"] = std::to_string(c.ensemble.members);
  m["ensemble.semi"] = on_off(c.ensemble.semi_enabled);
  m["ensemble.weights"] = on_off(c.ensemble.weights_enabled);
  m["ensemble.k_plus_one"] = on_off(c.ensemble.k_plus_one);
  m["ensemble.labeled_fraction"] = format_number(c.ensemble.labeled_fraction);
  m["ensemble.shared_init"] = on_off(c.ensemble.shared_init);
  m["ensemble.shared_shuffle"] = on_off(c.ensemble.shared_shuffle);
  m["acquisition.scorer"] = to_string(c.acquisition.scorer);
  m["acquisition.filtering"] = on_off(c.acquisition.filtering);
  m["acquisition.budget"] = std::to_string(c.acquisition.budget);
  m["acquisition.timing"] = to_string(c.acquisition.timing);
  m["acquisition.coreset_average_features"] = on_off(c.acquisition.coreset_average_features);
  return m;
}

Benchmark materialize_benchmark(const ExperimentConfig& config, std::uint64_t run_seed) {
  if (config.benchmark) {
    BenchmarkSpec spec = *config.benchmark;
    spec.seed = derive_seed(run_seed, SeedStream::benchmark, spec.seed);
    return generate_benchmark(spec);
  }
  return load_feature_dataset(config.dataset_path, config.dataset_schema);
}

// ---------------------------------------------------------------------------
// Round orchestration

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

// Enforces train -> evaluate -> acquire order inside a round, so accuracy is
// always measured before the round's acquisition reaches the pool.
class RoundProtocol {
 public:
  void trained() { advance(Phase::idle, Phase::trained, "train"); }
  void evaluated() { advance(Phase::trained, Phase::evaluated, "evaluate"); }
  void acquired() { advance(Phase::evaluated, Phase::acquired, "acquire"); }
  void close() {
    if (phase_ != Phase::evaluated && phase_ != Phase::acquired)
      throw std::logic_error("round closed before evaluation");
    phase_ = Phase::idle;
  }

 private:
  enum class Phase { idle, trained, evaluated, acquired };
  void advance(Phase from, Phase to, const char* what) {
    if (phase_ != from) throw std::logic_error(std::string("round protocol: unexpected ") + what);
    phase_ = to;
  }
  Phase phase_ = Phase::idle;
};

// Index reserved for the round-0 K-way reference classifier's init seed.
constexpr std::uint64_t kRoundZeroMember = 1ULL << 30;

std::string warning(const std::string& variant, std::uint64_t seed, int round, const std::string& msg) {
  return "level=warning variant=" + variant + " seed=" + std::to_string(seed) + " round=" + std::to_string(round) +
         " msg=\"" + msg + "\"";
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

}  // namespace

RoundZeroOutcome run_round_zero(const PoolState& pool, const Benchmark& benchmark, const ExperimentConfig& config,
                                std::uint64_t seed) {
  if (pool.round != 0) throw std::invalid_argument("run_round_zero: pool is past round 0");
  const int budget = config.acquisition.budget;
  if (budget > static_cast<int>(pool.unlabeled_ids.size()))
    throw std::invalid_argument("run_round_zero: budget exceeds the unlabeled pool");
  const auto start = Clock::now();
  const Oracle oracle(benchmark.data);

  // K-way reference classifier on L_0 (inliers only by construction).
  EnsembleConfig ens = config.ensemble;
  ens.seed = seed;
  const ClassifierConfig kway = round_model_config(config.model, benchmark.data, false);
  WeightedExamples<double> labeled;
  labeled.features.resize(benchmark.data.dim(), static_cast<Eigen::Index>(pool.labeled_ids.size()));
  labeled.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(pool.labeled_ids.size()));
  for (std::size_t i = 0; i < pool.labeled_ids.size(); ++i) {
    labeled.features.col(static_cast<Eigen::Index>(i)) = benchmark.data.features.col(pool.labeled_ids[i]);
    labeled.labels.push_back(pool.revealed_labels.at(pool.labeled_ids[i]));
  }
  auto t0 = Clock::now();
  auto model = Classifier::init(kway, derive_seed(seed, SeedStream::member_init, kRoundZeroMember));
  model = train_weighted(std::move(model), labeled, kway.epochs_supervised, kway.batch_size,
                         member_shuffle_seed(ens, 0, 0, 0));

  RoundZeroOutcome out;
  out.record.variant = config.variant;
  out.record.seed = seed;
  out.record.round = 0;
  out.record.supervised_ms = ms_since(t0);
  out.record.test_accuracy = eval_test_accuracy(model, benchmark.test_set, config.count_outlier_as_error);

  t0 = Clock::now();
  const auto scores = score_random(pool.unlabeled_ids, derive_seed(seed, SeedStream::scorer, 0));
  std::vector<ScoredExample> scored(pool.unlabeled_ids.size());
  for (std::size_t i = 0; i < scored.size(); ++i)
    scored[i] = ScoredExample{pool.unlabeled_ids[i], scores[i], false, scores[i]};
  out.record.acquired_ids = select_top_b(scored, budget, derive_seed(seed, SeedStream::tie_break, 0));
  out.record.scoring_ms = ms_since(t0);
  out.record.inlier_rate = inlier_rate(out.record.acquired_ids, oracle);
  out.pool = annotate(pool, out.record.acquired_ids, oracle, budget);
  out.record.wall_time_ms = ms_since(start);
  return out;
}

SeedRun run_seed(const ExperimentConfig& config, const Benchmark& benchmark, std::uint64_t seed) {
  config.validate();
  const int budget = config.acquisition.budget;
  if (static_cast<long>(budget) * config.rounds > static_cast<long>(benchmark.initial_pool.unlabeled_ids.size()))
    throw std::invalid_argument("experiment: budget * rounds exceeds the unlabeled pool");

  const Oracle oracle(benchmark.data);
  const PoolState& initial = benchmark.initial_pool;
  EnsembleConfig ens = config.ensemble;
  ens.seed = seed;
  const int outlier_label = ens.k_plus_one ? benchmark.data.outlier_label() : -1;

  SeedRun run;
  run.pools.push_back(initial);
  check_pool_invariants(initial, initial, budget, oracle);

  auto zero = run_round_zero(initial, benchmark, config, seed);
  check_pool_invariants(zero.pool, initial, budget, oracle);
  check_monotone(initial, zero.pool);
  run.records.push_back(std::move(zero.record));
  PoolState pool = std::move(zero.pool);
  run.pools.push_back(pool);

  if (config.acquisition.scorer == Scorer::vr && ens.members == 1)
    run.warnings.push_back(warning(config.variant, seed, 1,
                                   "vr scorer with M=1 gives all-zero scores; selection falls back to tie-break order"));

  RoundProtocol protocol;
  for (int t = 1; t <= config.rounds; ++t) {
    const auto start = Clock::now();
    RoundRecord rec;
    rec.variant = config.variant;
    rec.seed = seed;
    rec.round = t;

    const RoundModels models = train_round(pool, benchmark.data, ens, config.model, t);
    rec.supervised_ms = models.supervised_ms;
    rec.semi_ms = models.semi_ms;
    protocol.trained();

    const auto& final_members = models.final_members();
    const auto eval_index = static_cast<std::size_t>(seed % static_cast<std::uint64_t>(ens.members));
    rec.test_accuracy =
        eval_test_accuracy(final_members[eval_index], benchmark.test_set, config.count_outlier_as_error);
    if (ens.semi_enabled && !models.pseudo_labels.empty())
      rec.pseudo_label_accuracy = pseudo_label_accuracy(models.pseudo_labels, oracle);
    protocol.evaluated();

    if (t < config.rounds) {
      const auto t0 = Clock::now();
      const auto& scorers = config.acquisition.timing == AcquisitionTiming::before_semi ? models.supervised
                                                                                         : final_members;
      const auto acq = acquire(pool, benchmark.data, scorers, config.acquisition, outlier_label,
                               derive_seed(seed, SeedStream::scorer, static_cast<std::uint64_t>(t)),
                               derive_seed(seed, SeedStream::tie_break, static_cast<std::uint64_t>(t)));
      rec.scoring_ms = ms_since(t0);
      rec.acquired_ids = acq.acquired;
      rec.inlier_rate = inlier_rate(acq.acquired, oracle);
      if (config.dump_predictions) {
        for (std::size_t i = 0; i < acq.scored.size(); ++i) {
          const auto& p = acq.predictions[i];
          const int id = acq.scored[i].id;
          run.prediction_rows += std::to_string(t) + ',' + std::to_string(id) + ',' + std::to_string(p.pseudo_label) +
                                 ',' + format_number(p.weight) + ',' + format_number(p.vr) + ',' +
                                 std::to_string(oracle.label(id)) + '\n';
        }
      }
      protocol.acquired();
      PoolState next = annotate(pool, acq.acquired, oracle, budget);
      check_pool_invariants(next, initial, budget, oracle);
      check_monotone(pool, next);
      pool = std::move(next);
      run.pools.push_back(pool);
    }
    protocol.close();
    rec.wall_time_ms = ms_since(start);
    run.records.push_back(std::move(rec));
  }
  return run;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.record_wall_time = config.record_wall_time;
  std::optional<Benchmark> shared;
  if (!config.benchmark) shared = materialize_benchmark(config, 0);
  for (const auto seed : config.seeds) {
    const Benchmark benchmark = shared ? *shared : materialize_benchmark(config, seed);
    auto run = run_seed(config, benchmark, seed);
    result.records.insert(result.records.end(), run.records.begin(), run.records.end());
    result.warnings.insert(result.warnings.end(), run.warnings.begin(), run.warnings.end());
    if (config.dump_predictions)
      result.dumps.push_back({"predictions_" + sanitize(config.variant) + "_seed" + std::to_string(seed) + ".csv",
                              "round,id,pseudo_label,weight,vr,true_label\n" + run.prediction_rows});
  }
  result.summary = summarize(result.records);
  return result;
}

Axis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("axis '" + spec + "' is not key=v1,v2,...");
  Axis axis{trim(std::string_view(spec).substr(0, eq)), split_list(spec.substr(eq + 1))};
  if (axis.key.empty()) throw std::invalid_argument("axis '" + spec + "' has an empty key");
  if (axis.values.empty() ||
      std::any_of(axis.values.begin(), axis.values.end(), [](const std::string& v) { return v.empty(); }))
    throw std::invalid_argument("axis '" + axis.key + "' has empty values");
  return axis;
}

ExperimentResult run_variant_matrix(const ConfigMap& base, const std::vector<Axis>& axes) {
  for (const auto& a : axes)
    if (a.values.empty()) throw std::invalid_argument("axis '" + a.key + "' has no values");

  ExperimentResult result;
  std::vector<std::size_t> index(axes.size(), 0);
  while (true) {
    ConfigMap cfg = base;
    std::string label;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const auto& key = axes[i].key;
      const auto& value = axes[i].values[index[i]];
      cfg[key] = value;
      const auto dot = key.rfind('.');
      if (!label.empty()) label += '+';
      label += (dot == std::string::npos ? key : key.substr(dot + 1)) + "=" + value;
    }
    if (label.empty()) label = base.contains("experiment.variant") ? base.at("experiment.variant") : "default";
    cfg["experiment.variant"] = label;
    const auto run = run_experiment(experiment_config_from_map(cfg));
    result.record_wall_time = run.record_wall_time;
    result.records.insert(result.records.end(), run.records.begin(), run.records.end());
    result.warnings.insert(result.warnings.end(), run.warnings.begin(), run.warnings.end());
    result.dumps.insert(result.dumps.end(), run.dumps.begin(), run.dumps.end());

    // Odometer over the axes, last axis fastest.
    bool carry = true;
    for (std::size_t i = axes.size(); carry && i-- > 0;) {
      if (++index[i] < axes[i].values.size())
        carry = false;
      else
        index[i] = 0;
    }
    if (carry) break;
  }
  result.summary = summarize(result.records);
  return result;
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir, const std::string& manifest) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f << text;
  };
  std::string metrics = metrics_header();
  std::string acquired = "variant,seed,round,rank,id\n";
  std::string timing = "variant,seed,round,supervised_ms,semi_ms,scoring_ms,wall_time_ms\n";
  for (const auto& r : result.records) {
    metrics += format_metrics_row(r, result.record_wall_time);
    acquired += format_acquired_rows(r);
    timing += csv_field(r.variant) + ',' + std::to_string(r.seed) + ',' + std::to_string(r.round) + ',' +
              format_number(r.supervised_ms) + ',' + format_number(r.semi_ms) + ',' + format_number(r.scoring_ms) +
              ',' + format_number(r.wall_time_ms) + '\n';
  }
  write("metrics.csv", metrics);
  write("acquired.csv", acquired);
  write("summary.csv", format_summary(result.summary));
  write("timing.csv", timing);
  std::string warnings;
  for (const auto& w : result.warnings) warnings += w + '\n';
  write("warnings.log", warnings);
  for (const auto& d : result.dumps) write(d.name, d.text);
  write("manifest.txt", manifest);
}

}  // namespace osal
