#pragma once

#include "krig/baselines.hpp"
#include "krig/drik.hpp"
#include "krig/evalshift.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace krig {

enum class NodeSplitMode { fixed_ratios, missing_ratio };

struct ExperimentConfig {
  // dataset: an empty path means "generate from the synth section in memory"
  std::string dataset_path;
  FieldFormat dataset_format = FieldFormat::csv_wide;
  NormalizerKind normalizer = NormalizerKind::global_z_score;
  SynthParams synth;
  SplitConfig split;
  /// missing-ratio: test share = missing_ratio, the rest split 3:1 into
  /// train and validation. Used by the sweep.
  NodeSplitMode node_split_mode = NodeSplitMode::fixed_ratios;
  double missing_ratio = 0.25;
  GraphBuilderParams graph;
  ModelConfig model;
  TrainerConfig trainer;
  DrikConfig drik;
  std::vector<std::string> baseline_methods{"mean", "knn", "okriging"};
  int knn_k = 10;
  GpKernelSpec kernel;
  Phase shift_phase = Phase::test;
  std::vector<double> sweep_ratios{0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875};
  std::vector<std::string> sweep_methods{"drik", "mean", "knn", "okriging"};
  std::string output_dir = "runs/default";
  double mape_floor = 1e-4;

  /// Node ratios after applying node_split_mode.
  std::array<double, 3> effective_node_ratios() const;
};

/// Parses a config document. Missing keys take defaults; unknown keys and
/// ill-typed values throw ErrorKind::config.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved config, every key present.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// FNV-1a of the canonical dump, excluding output.dir so the same
/// experiment hashes identically wherever it is written.
std::string config_hash(const ExperimentConfig& cfg);

bool is_model_method(const std::string& method);
bool is_baseline_method(const std::string& method);

/// One experiment rooted at config.output_dir. Each command writes its
/// artifacts there and returns a JSON summary.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }

  nlohmann::json split();
  nlohmann::json train(const std::string& method);
  nlohmann::json evaluate(const std::string& method, Phase phase);
  /// Empty method: every configured baseline.
  nlohmann::json baseline(const std::string& method, Phase phase);
  nlohmann::json shift(Phase phase);
  nlohmann::json synth();
  /// threads <= 0: KRIGBENCH_THREADS, else the hardware concurrency.
  nlohmann::json sweep(int threads);

 private:
  const SensorField& field();
  /// Reads split.txt from the output directory, creating it when absent.
  SplitPlan plan();
  std::string method_dir(const std::string& method) const;
  void write_report(Phase phase) const;
  nlohmann::json write_predictions(const std::string& method, Phase phase, const KrigePrediction& pred,
                                   const Normalizer& normalizer);

  ExperimentConfig config_;
  std::optional<SensorField> field_;
  AccessLog log_;
};

}  // namespace krig
