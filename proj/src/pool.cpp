#include "osal/pool.hpp"

#include "osal/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace osal {

Example Dataset::example(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("example id " + std::to_string(id));
  return Example{id, features.col(id), labels[static_cast<std::size_t>(id)]};
}

int Oracle::label(int id) const {
  if (id < 0 || id >= data_->size()) throw std::out_of_range("oracle: unknown id " + std::to_string(id));
  return data_->labels[static_cast<std::size_t>(id)];
}

// ---------------------------------------------------------------------------
// Benchmark generation

int BenchmarkSpec::resolved_outlier_count() const {
  const double inliers = static_cast<double>(num_classes) * n_inlier_per_class;
  if (n_outlier >= 0) return n_outlier;
  if (!outlier_ratio) return 0;
  const double r = *outlier_ratio;
  return static_cast<int>(std::lround(r * inliers / (1.0 - r)));
}

void BenchmarkSpec::validate() const {
  if (num_classes < 1) throw std::invalid_argument("benchmark: num_classes must be positive");
  if (dim < 1) throw std::invalid_argument("benchmark: dim must be positive");
  if (n_inlier_per_class < 1) throw std::invalid_argument("benchmark: n_inlier_per_class must be positive");
  if (initial_labeled_per_class < 1)
    throw std::invalid_argument("benchmark: initial_labeled_per_class must be positive");
  if (test_per_class < 1) throw std::invalid_argument("benchmark: test_per_class must be positive");
  if (outlier_ratio && (*outlier_ratio < 0.0 || *outlier_ratio >= 1.0))
    throw std::invalid_argument("benchmark: outlier_ratio must lie in [0, 1)");
  if (inlier_stddev <= 0.0 || outlier_stddev <= 0.0)
    throw std::invalid_argument("benchmark: cluster stddev must be positive");

  const int n_out = resolved_outlier_count();
  if (n_out > 0 && outlier_clusters < 1)
    throw std::invalid_argument("benchmark: outliers requested but outlier_clusters < 1");
  if (outlier_ratio && n_outlier >= 0) {
    const double total = n_out + static_cast<double>(num_classes) * n_inlier_per_class;
    const double actual = n_out / total;
    if (std::abs(actual - *outlier_ratio) > 1.0 / total + 1e-12)
      throw std::invalid_argument("benchmark: n_outlier inconsistent with outlier_ratio");
  }

  if (!inlier_means.empty()) {
    if (static_cast<int>(inlier_means.size()) != num_classes)
      throw std::invalid_argument("benchmark: need one inlier mean per class");
    for (const auto& m : inlier_means)
      if (m.size() != dim) throw std::invalid_argument("benchmark: inlier mean dimension mismatch");
  }
  if (!inlier_stddevs.empty()) {
    if (static_cast<int>(inlier_stddevs.size()) != num_classes)
      throw std::invalid_argument("benchmark: need one inlier stddev per class");
    for (double s : inlier_stddevs)
      if (s <= 0.0) throw std::invalid_argument("benchmark: cluster stddev must be positive");
  }
}

namespace {

Eigen::VectorXd gaussian_point(Rng& rng, const Eigen::VectorXd& mean, double stddev) {
  Eigen::VectorXd x(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) x[i] = rng.normal(mean[i], stddev);
  return x;
}

// Stream indices inside the benchmark seed.
constexpr std::uint64_t kClusterParams = 0;
constexpr std::uint64_t kOutlierDraws = 1;
constexpr std::uint64_t kInlierDrawsBase = 100;
constexpr std::uint64_t kTestDrawsBase = 10000;

}  // namespace

Benchmark generate_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  const int k = spec.num_classes;
  const int d = spec.dim;
  const int n_out = spec.resolved_outlier_count();

  Rng params(derive_seed(spec.seed, SeedStream::benchmark, kClusterParams));
  std::vector<Eigen::VectorXd> means = spec.inlier_means;
  if (means.empty()) {
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(d);
    for (int c = 0; c < k; ++c) means.push_back(gaussian_point(params, origin, spec.inlier_mean_scale));
  }
  std::vector<double> stddevs = spec.inlier_stddevs;
  if (stddevs.empty()) stddevs.assign(static_cast<std::size_t>(k), spec.inlier_stddev);

  std::vector<Eigen::VectorXd> outlier_means;
  if (n_out > 0) {
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(d);
    int attempts = 0;
    while (static_cast<int>(outlier_means.size()) < spec.outlier_clusters) {
      if (++attempts > 100000)
        throw std::invalid_argument("benchmark: cannot place outlier clusters at the requested separation");
      Eigen::VectorXd candidate = gaussian_point(params, origin, spec.outlier_mean_scale);
      const bool clear = std::all_of(means.begin(), means.end(), [&](const Eigen::VectorXd& m) {
        return (candidate - m).norm() >= spec.outlier_min_separation;
      });
      if (clear) outlier_means.push_back(std::move(candidate));
    }
  }

  const int n_labeled = k * spec.initial_labeled_per_class;
  const int n_pool = n_labeled + k * spec.n_inlier_per_class + n_out;

  Benchmark out;
  out.data.num_inlier_classes = k;
  out.data.features.resize(d, n_pool);
  out.data.labels.resize(static_cast<std::size_t>(n_pool));
  out.test_set.num_inlier_classes = k;
  out.test_set.features.resize(d, k * spec.test_per_class);
  out.test_set.labels.resize(static_cast<std::size_t>(k * spec.test_per_class));

  // Each class draws its labeled points first, then its unlabeled points, from
  // a private stream. Larger pools therefore extend smaller ones.
  int next_id = 0;
  std::vector<Rng> class_streams;
  for (int c = 0; c < k; ++c)
    class_streams.emplace_back(derive_seed(spec.seed, SeedStream::benchmark, kInlierDrawsBase + c));
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < spec.initial_labeled_per_class; ++i) {
      out.data.features.col(next_id) = gaussian_point(class_streams[c], means[c], stddevs[c]);
      out.data.labels[next_id] = c;
      out.initial_pool.labeled_ids.push_back(next_id);
      out.initial_pool.revealed_labels[next_id] = c;
      ++next_id;
    }
  }
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < spec.n_inlier_per_class; ++i) {
      out.data.features.col(next_id) = gaussian_point(class_streams[c], means[c], stddevs[c]);
      out.data.labels[next_id] = c;
      out.initial_pool.unlabeled_ids.push_back(next_id);
      ++next_id;
    }
  }
  Rng outlier_stream(derive_seed(spec.seed, SeedStream::benchmark, kOutlierDraws));
  for (int i = 0; i < n_out; ++i) {
    const auto cluster = outlier_stream.below(outlier_means.size());
    out.data.features.col(next_id) = gaussian_point(outlier_stream, outlier_means[cluster], spec.outlier_stddev);
    out.data.labels[next_id] = k;
    out.initial_pool.unlabeled_ids.push_back(next_id);
    ++next_id;
  }

  int test_id = 0;
  for (int c = 0; c < k; ++c) {
    Rng test_stream(derive_seed(spec.seed, SeedStream::benchmark, kTestDrawsBase + c));
    for (int i = 0; i < spec.test_per_class; ++i) {
      out.test_set.features.col(test_id) = gaussian_point(test_stream, means[c], stddevs[c]);
      out.test_set.labels[test_id] = c;
      ++test_id;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Annotation and invariants

PoolState annotate(const PoolState& pool, std::span<const int> acquired_ids, const Oracle& oracle,
                   int budget) {
  if (static_cast<int>(acquired_ids.size()) != budget)
    throw std::invalid_argument("annotate: expected " + std::to_string(budget) + " ids, got " +
                                std::to_string(acquired_ids.size()));
  std::set<int> seen;
  for (int id : acquired_ids) {
    if (!seen.insert(id).second) throw std::invalid_argument("annotate: duplicate id " + std::to_string(id));
    if (!std::binary_search(pool.unlabeled_ids.begin(), pool.unlabeled_ids.end(), id))
      throw std::invalid_argument("annotate: id " + std::to_string(id) + " is not unlabeled");
  }

  PoolState next;
  next.round = pool.round + 1;
  next.labeled_ids = pool.labeled_ids;
  next.revealed_labels = pool.revealed_labels;
  for (int id : acquired_ids) {
    next.labeled_ids.push_back(id);
    next.revealed_labels[id] = oracle.label(id);
  }
  next.unlabeled_ids.reserve(pool.unlabeled_ids.size() - acquired_ids.size());
  for (int id : pool.unlabeled_ids)
    if (!seen.contains(id)) next.unlabeled_ids.push_back(id);
  return next;
}

void check_pool_invariants(const PoolState& pool, const PoolState& initial, int budget,
                           const Oracle& oracle) {
  std::set<int> labeled(pool.labeled_ids.begin(), pool.labeled_ids.end());
  if (labeled.size() != pool.labeled_ids.size()) throw std::logic_error("pool: duplicate labeled id");
  for (int id : pool.unlabeled_ids)
    if (labeled.contains(id)) throw std::logic_error("pool: id in both L and U");

  std::set<int> universe(initial.labeled_ids.begin(), initial.labeled_ids.end());
  universe.insert(initial.unlabeled_ids.begin(), initial.unlabeled_ids.end());
  std::set<int> now = labeled;
  now.insert(pool.unlabeled_ids.begin(), pool.unlabeled_ids.end());
  if (now != universe) throw std::logic_error("pool: L u U differs from L_0 u U_0");

  const auto expected = initial.labeled_ids.size() +
                        static_cast<std::size_t>(pool.round - initial.round) * static_cast<std::size_t>(budget);
  if (pool.labeled_ids.size() != expected) throw std::logic_error("pool: |L_t| != |L_0| + t*B");

  if (pool.revealed_labels.size() != labeled.size()) throw std::logic_error("pool: revealed labels do not cover L");
  for (const auto& [id, label] : pool.revealed_labels) {
    if (!labeled.contains(id)) throw std::logic_error("pool: revealed label outside L");
    if (label != oracle.label(id)) throw std::logic_error("pool: revealed label disagrees with oracle");
  }
}

void check_monotone(const PoolState& before, const PoolState& after) {
  for (int id : before.labeled_ids)
    if (!after.is_labeled(id)) throw std::logic_error("pool: labeled set shrank");
  for (int id : after.unlabeled_ids)
    if (!std::binary_search(before.unlabeled_ids.begin(), before.unlabeled_ids.end(), id))
      throw std::logic_error("pool: unlabeled set grew");
}

// ---------------------------------------------------------------------------
// Delimited text format

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

void append_row(std::string& out, int id, std::string_view split, int label,
                const Eigen::Ref<const Eigen::VectorXd>& f, char delim) {
  out += std::to_string(id);
  out += delim;
  out += split;
  out += delim;
  out += std::to_string(label);
  for (Eigen::Index j = 0; j < f.size(); ++j) {
    out += delim;
    append_double(out, f[j]);
  }
  out += '\n';
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    fields.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view s, int line_no, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::runtime_error("dataset line " + std::to_string(line_no) + ": bad " + what + " '" +
                             std::string(s) + "'");
  return value;
}

}  // namespace

std::string format_feature_dataset(const Benchmark& b, char delim) {
  const int d = b.data.dim();
  std::string out = "id";
  out += delim;
  out += "split";
  out += delim;
  out += "label";
  for (int j = 0; j < d; ++j) {
    out += delim;
    out += 'f' + std::to_string(j);
  }
  out += '\n';
  for (int id = 0; id < b.data.size(); ++id) {
    const bool labeled = b.initial_pool.is_labeled(id);
    append_row(out, id, labeled ? "labeled" : "unlabeled", b.data.labels[id], b.data.features.col(id), delim);
  }
  for (int i = 0; i < b.test_set.size(); ++i)
    append_row(out, b.data.size() + i, "test", b.test_set.labels[i], b.test_set.features.col(i), delim);
  return out;
}

void write_feature_dataset(const std::filesystem::path& path, const Benchmark& b, char delim) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << format_feature_dataset(b, delim);
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

Benchmark parse_feature_dataset(const std::string& text, const FeatureSchema& schema) {
  const int k = schema.num_inlier_classes;
  if (k < 1) throw std::invalid_argument("dataset schema: num_inlier_classes must be positive");

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: empty file");
  ++line_no;
  const auto header = split_fields(line, schema.delimiter);
  if (header.size() < 4 || header[0] != "id" || header[1] != "split" || header[2] != "label")
    throw std::runtime_error("dataset: header must start with id, split, label and at least one feature");
  const int d = static_cast<int>(header.size()) - 3;

  struct Row {
    int id;
    int label;
    std::vector<double> f;
  };
  std::vector<Row> pool_rows, test_rows;
  std::vector<bool> pool_labeled;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line, schema.delimiter);
    if (static_cast<int>(fields.size()) != d + 3)
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": expected " +
                               std::to_string(d + 3) + " fields, got " + std::to_string(fields.size()));
    Row row;
    row.id = parse_number<int>(fields[0], line_no, "id");
    row.label = parse_number<int>(fields[2], line_no, "label");
    if (row.label < 0 || row.label > k)
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": label outside [0, K]");
    row.f.reserve(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) row.f.push_back(parse_number<double>(fields[3 + j], line_no, "feature"));

    const auto split = fields[1];
    if (split == "labeled" || split == "unlabeled") {
      if (split == "labeled" && row.label == k)
        throw std::runtime_error("dataset line " + std::to_string(line_no) + ": outlier in the labeled split");
      pool_labeled.push_back(split == "labeled");
      pool_rows.push_back(std::move(row));
    } else if (split == "test") {
      if (row.label == k)
        throw std::runtime_error("dataset line " + std::to_string(line_no) + ": outlier in the test split");
      test_rows.push_back(std::move(row));
    } else {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": unknown split '" +
                               std::string(split) + "'");
    }
  }

  Benchmark b;
  const int n = static_cast<int>(pool_rows.size());
  b.data.num_inlier_classes = k;
  b.data.features.resize(d, n);
  b.data.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<bool> labeled_by_id(static_cast<std::size_t>(n), false);
  for (std::size_t r = 0; r < pool_rows.size(); ++r) {
    const auto& row = pool_rows[r];
    if (row.id < 0 || row.id >= n || seen[row.id])
      throw std::runtime_error("dataset: pool ids must be unique and cover 0.." + std::to_string(n - 1));
    seen[row.id] = true;
    b.data.labels[row.id] = row.label;
    b.data.features.col(row.id) = Eigen::Map<const Eigen::VectorXd>(row.f.data(), d);
    labeled_by_id[row.id] = pool_labeled[r];
  }
  for (int id = 0; id < n; ++id) {
    if (labeled_by_id[id]) {
      b.initial_pool.labeled_ids.push_back(id);
      b.initial_pool.revealed_labels[id] = b.data.labels[id];
    } else {
      b.initial_pool.unlabeled_ids.push_back(id);
    }
  }

  b.test_set.num_inlier_classes = k;
  b.test_set.features.resize(d, static_cast<Eigen::Index>(test_rows.size()));
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    b.test_set.labels.push_back(test_rows[i].label);
    b.test_set.features.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(test_rows[i].f.data(), d);
  }
  return b;
}

Benchmark load_feature_dataset(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_feature_dataset(ss.str(), schema);
}

}  // namespace osal
