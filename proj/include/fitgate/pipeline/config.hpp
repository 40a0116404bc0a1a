#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace fitgate::pipeline {

struct DataConfig {
  int train_per_class = 500;
  int test_per_class = 100;
  int image_size = 64;
};

struct ClassifierConfig {
  double learning_rate = 0.05;
  int halve_every_epochs = 3;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 10;
};

struct DistortionConfig {
  int subset = 1000;  // source images per kind x level
  std::array<double, 5> blur_sigma{0.5, 1.0, 2.0, 3.0, 4.0};
  std::array<double, 5> noise_sigma{0.02, 0.05, 0.10, 0.15, 0.25};
  std::array<double, 5> jpeg_multiplier{2, 4, 8, 16, 32};
  std::array<double, 5> jp2k_keep{0.5, 0.25, 0.10, 0.05, 0.02};
};

struct IqaConfig {
  int source_images = 300;  // pristine training images, each also distorted 20 ways
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 20;
  std::vector<int> hidden{64, 64};
  double target_sigma_bins = 2.0;
  int patch_size = 32;
  int patch_stride = 16;
};

struct AttackConfig {
  double fgsm_epsilon = 0.05;
  int deepfool_max_iter = 50;
  double deepfool_overshoot = 0.02;
  int deepfool_probe_images = 100;
  double uap_xi = 0.1;
  double uap_target_fool_rate = 0.7;
  int uap_max_epochs = 10;
  int uap_train_images = 400;
  int adversarial_count = 500;
  int fooling_count = 200;
  double fool_alpha = 0.05;
  double fool_confidence = 0.99;
  int fool_max_iter = 2000;
};

struct DetectorConfig {
  double C = 10.0;
  double gamma = 1.0 / 6.0;
  double tol = 1e-3;
  int max_passes = 20;
  double tau = 0.3;
  double calibration_percentile = 5.0;
  int repetitions = 10;
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out = "run";
  DataConfig data;
  ClassifierConfig classifier;
  DistortionConfig distortion;
  IqaConfig iqa;
  AttackConfig attack;
  DetectorConfig detector;
};

// Every field with its default.
nlohmann::json default_config_json();

// Overlays `overrides` onto the defaults. Unknown keys and type mismatches
// raise kConfig.
nlohmann::json merge_config(const nlohmann::json& base, const nlohmann::json& overrides);

// "a.b.c=value": the value is parsed as JSON when possible, else taken as a
// string. Raises kConfig for malformed input or unknown keys.
void apply_override(nlohmann::json& config, const std::string& assignment);

// Converts and validates against every operation's preconditions (kConfig).
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

ExperimentConfig load_config_file(const std::filesystem::path& path);

}  // namespace fitgate::pipeline
