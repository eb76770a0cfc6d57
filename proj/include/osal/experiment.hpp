#pragma once

#include "osal/acquisition.hpp"
#include "osal/ensemble.hpp"
#include "osal/metrics.hpp"
#include "osal/model.hpp"
#include "osal/pool.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace osal {

/// Flat key/value configuration with dotted section names. `[section]`
/// headers prefix the keys that follow them.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::filesystem::path& path);
/// Applies one `key=value` override.
void apply_override(ConfigMap& config, const std::string& assignment);
std::string format_config(const ConfigMap& config);

struct ExperimentConfig {
  std::optional<BenchmarkSpec> benchmark;  // synthetic source
  std::filesystem::path dataset_path;      // precomputed-feature source
  FeatureSchema dataset_schema;

  int rounds = 5;  // T acquisitions; round T trains and evaluates only
  ClassifierConfig model;
  EnsembleConfig ensemble;
  AcquisitionConfig acquisition;
  std::vector<std::uint64_t> seeds = {0};
  std::string variant = "default";
  std::filesystem::path output_dir = "out";
  bool dump_predictions = false;
  bool record_wall_time = false;
  bool count_outlier_as_error = false;
  std::filesystem::path warm_start_path;  // whitespace-separated doubles

  void validate() const;
};

/// Unknown keys are an error. Keys absent from the map keep their defaults.
ExperimentConfig experiment_config_from_map(const ConfigMap& config);
/// Every field, defaults included; the run manifest.
ConfigMap experiment_config_to_map(const ExperimentConfig& config);
BenchmarkSpec benchmark_spec_from_map(const ConfigMap& config);

/// The dataset a given run seed sees. Synthetic benchmarks derive their seed
/// from the run seed and benchmark.seed.
Benchmark materialize_benchmark(const ExperimentConfig& config, std::uint64_t run_seed);

struct PredictionDump {
  std::string name;   // file name
  std::string text;   // round,id,pseudo_label,weight,vr,true_label rows
};

struct SeedRun {
  std::vector<RoundRecord> records;
  std::vector<PoolState> pools;  // pool at the start of every round, then the final one
  std::vector<std::string> warnings;
  std::string prediction_rows;
};

struct RoundZeroOutcome {
  PoolState pool;
  RoundRecord record;
};

/// Trains a K-way reference classifier on L_0, then acquires B examples by
/// uniform random scores. No filtering and no semi-supervision.
RoundZeroOutcome run_round_zero(const PoolState& pool, const Benchmark& benchmark, const ExperimentConfig& config,
                                std::uint64_t seed);

SeedRun run_seed(const ExperimentConfig& config, const Benchmark& benchmark, std::uint64_t seed);

struct ExperimentResult {
  std::vector<RoundRecord> records;
  std::vector<std::string> warnings;
  std::vector<PredictionDump> dumps;
  std::vector<SummaryRow> summary;
  bool record_wall_time = false;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

struct Axis {
  std::string key;
  std::vector<std::string> values;
};

Axis parse_axis(const std::string& spec);  // key=v1,v2,...

/// Cross product of the axes over `base`, sharing seeds so every variant sees
/// the same pools. Variant labels read `short_key=value+short_key=value`.
ExperimentResult run_variant_matrix(const ConfigMap& base, const std::vector<Axis>& axes);

/// Writes metrics.csv, acquired.csv, summary.csv, timing.csv, warnings.log,
/// optional prediction dumps, and manifest.txt (the resolved config).
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir, const std::string& manifest);

}  // namespace osal
