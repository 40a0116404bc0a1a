#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>

#include "fitgate/pipeline/config.hpp"

namespace fitgate::pipeline {

enum class Stage {
  kGenData,
  kTrainClassifier,
  kTrainIqa,
  kGenDistortions,
  kGenAdversarial,
  kExtractFeatures,
  kTrainDetector,
  kEvaluate,
  kReport,
};

// In execution order.
std::span<const Stage> all_stages();
std::string_view stage_name(Stage stage);
// Throws kConfig for unknown names.
Stage stage_from_name(std::string_view name);

// Independent seed for a stage, derived from the master seed. gen-data uses
// the master seed itself so the dataset matches generate_dataset(seed).
std::uint64_t stage_seed(std::uint64_t master, Stage stage);

// Artifact locations under the output directory. Manifest paths outside data/
// are relative to the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path data_dir() const { return root / "data"; }
  std::filesystem::path data_manifest() const { return data_dir() / "manifest.csv"; }
  std::filesystem::path classifier_model() const { return root / "classifier" / "network.json"; }
  std::filesystem::path classifier_history() const { return root / "classifier" / "history.json"; }
  std::filesystem::path iqa_model() const { return root / "iqa" / "model.json"; }
  std::filesystem::path iqa_history() const { return root / "iqa" / "history.json"; }
  std::filesystem::path distorted_manifest() const { return root / "distorted" / "manifest.csv"; }
  std::filesystem::path adversarial_manifest() const { return root / "adversarial" / "manifest.csv"; }
  std::filesystem::path perturbation() const { return root / "adversarial" / "perturbation.json"; }
  std::filesystem::path attack_stats() const { return root / "adversarial" / "attack_stats.json"; }
  std::filesystem::path features_csv() const { return root / "features" / "features.csv"; }
  std::filesystem::path feature_meta_csv() const { return root / "features" / "feature_meta.csv"; }
  std::filesystem::path test_predictions_csv() const { return root / "features" / "test_predictions.csv"; }
  std::filesystem::path detector_protocol() const { return root / "detector" / "protocol.json"; }
  std::filesystem::path detector_model(int repetition) const;
  std::filesystem::path evaluation() const { return root / "evaluation" / "evaluation.json"; }
  std::filesystem::path report_dir() const { return root / "report"; }
  std::filesystem::path report_json() const { return report_dir() / "report.json"; }
  std::filesystem::path tables_csv() const { return report_dir() / "tables.csv"; }
  std::filesystem::path semantic_csv() const { return report_dir() / "semantic_pairs.csv"; }
};

using Logger = std::function<void(const std::string&)>;

// Runs one stage. Missing predecessor artifacts raise kMissingPrerequisite
// with a message naming the stage that produces them.
void run_stage(Stage stage, const ExperimentConfig& config, const Logger& log = {});

// Every stage in order.
void run_all(const ExperimentConfig& config, const Logger& log = {});

}  // namespace fitgate::pipeline
