// osal: command-line driver for open-set active learning experiments.
//
//   osal run --config exp.cfg [--seed N] [--out DIR] [--override key=value ...]
//   osal matrix --config exp.cfg --axis key=v1,v2 [--axis ...] [--out DIR]
//   osal gen-benchmark --spec bench.cfg --out data.csv

#include "osal/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int run_command(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                const std::string& out_dir, const std::vector<std::string>& overrides) {
  auto map = osal::load_config_file(config_path);
  for (const auto& o : overrides) osal::apply_override(map, o);
  if (seed) map["experiment.seeds"] = std::to_string(*seed);
  if (!out_dir.empty()) map["experiment.output_dir"] = out_dir;
  const auto config = osal::experiment_config_from_map(map);
  const auto result = osal::run_experiment(config);
  for (const auto& w : result.warnings) std::cerr << w << '\n';
  osal::write_outputs(result, config.output_dir, osal::format_config(osal::experiment_config_to_map(config)));
  std::cout << osal::format_summary(result.summary);
  return 0;
}

int matrix_command(const std::string& config_path, const std::vector<std::string>& axis_specs,
                   const std::string& out_dir, const std::vector<std::string>& overrides) {
  auto map = osal::load_config_file(config_path);
  for (const auto& o : overrides) osal::apply_override(map, o);
  if (!out_dir.empty()) map["experiment.output_dir"] = out_dir;
  std::vector<osal::Axis> axes;
  for (const auto& spec : axis_specs) axes.push_back(osal::parse_axis(spec));
  const auto base = osal::experiment_config_from_map(map);
  const auto result = osal::run_variant_matrix(map, axes);
  for (const auto& w : result.warnings) std::cerr << w << '\n';

  std::string manifest = osal::format_config(osal::experiment_config_to_map(base));
  for (const auto& a : axes) {
    manifest += "axis " + a.key + " =";
    for (const auto& v : a.values) manifest += " " + v;
    manifest += '\n';
  }
  osal::write_outputs(result, base.output_dir, manifest);
  std::cout << osal::format_summary(result.summary);
  return 0;
}

int gen_benchmark_command(const std::string& spec_path, const std::string& out_path) {
  const auto spec = osal::benchmark_spec_from_map(osal::load_config_file(spec_path));
  osal::write_feature_dataset(out_path, osal::generate_benchmark(spec));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set active learning with ensembles, pseudo-labels and outlier filtering"};
  app.require_subcommand(1);

  std::string config_path, out_dir, spec_path, out_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides, axes;

  auto* run = app.add_subcommand("run", "Run one experiment configuration over its seeds");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Run a single seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--override", overrides, "key=value override (repeatable)");

  auto* matrix = app.add_subcommand("matrix", "Run the cross product of variant axes");
  matrix->add_option("--config", config_path, "Base config file")->required()->check(CLI::ExistingFile);
  matrix->add_option("--axis", axes, "key=v1,v2,... (repeatable)")->required();
  matrix->add_option("--out", out_dir, "Output directory");
  matrix->add_option("--override", overrides, "key=value override (repeatable)");

  auto* gen = app.add_subcommand("gen-benchmark", "Write a synthetic benchmark as a feature dataset");
  gen->add_option("--spec", spec_path, "Benchmark spec file")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Output dataset path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, seed, out_dir, overrides);
    if (*matrix) return matrix_command(config_path, axes, out_dir, overrides);
    if (*gen) return gen_benchmark_command(spec_path, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
