#include "fitgate/pipeline/config.hpp"

#include "fitgate/core/error.hpp"
#include "fitgate/core/text.hpp"

namespace fitgate::pipeline {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kConfig, "invalid config: " + what);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config key '") + key + "': " + e.what());
  }
}

bool ladder_ok(const std::array<double, 5>& v, bool increasing) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (increasing ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) return false;
  }
  return true;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  return {
      {"seed", c.seed},
      {"out", c.out.string()},
      {"data",
       {{"train_per_class", c.data.train_per_class},
        {"test_per_class", c.data.test_per_class},
        {"image_size", c.data.image_size}}},
      {"classifier",
       {{"learning_rate", c.classifier.learning_rate},
        {"halve_every_epochs", c.classifier.halve_every_epochs},
        {"momentum", c.classifier.momentum},
        {"batch_size", c.classifier.batch_size},
        {"epochs", c.classifier.epochs}}},
      {"distortion",
       {{"subset", c.distortion.subset},
        {"blur_sigma", c.distortion.blur_sigma},
        {"noise_sigma", c.distortion.noise_sigma},
        {"jpeg_multiplier", c.distortion.jpeg_multiplier},
        {"jp2k_keep", c.distortion.jp2k_keep}}},
      {"iqa",
       {{"source_images", c.iqa.source_images},
        {"learning_rate", c.iqa.learning_rate},
        {"momentum", c.iqa.momentum},
        {"batch_size", c.iqa.batch_size},
        {"epochs", c.iqa.epochs},
        {"hidden", c.iqa.hidden},
        {"target_sigma_bins", c.iqa.target_sigma_bins},
        {"patch_size", c.iqa.patch_size},
        {"patch_stride", c.iqa.patch_stride}}},
      {"attack",
       {{"fgsm_epsilon", c.attack.fgsm_epsilon},
        {"deepfool_max_iter", c.attack.deepfool_max_iter},
        {"deepfool_overshoot", c.attack.deepfool_overshoot},
        {"deepfool_probe_images", c.attack.deepfool_probe_images},
        {"uap_xi", c.attack.uap_xi},
        {"uap_target_fool_rate", c.attack.uap_target_fool_rate},
        {"uap_max_epochs", c.attack.uap_max_epochs},
        {"uap_train_images", c.attack.uap_train_images},
        {"adversarial_count", c.attack.adversarial_count},
        {"fooling_count", c.attack.fooling_count},
        {"fool_alpha", c.attack.fool_alpha},
        {"fool_confidence", c.attack.fool_confidence},
        {"fool_max_iter", c.attack.fool_max_iter}}},
      {"detector",
       {{"C", c.detector.C},
        {"gamma", c.detector.gamma},
        {"tol", c.detector.tol},
        {"max_passes", c.detector.max_passes},
        {"tau", c.detector.tau},
        {"calibration_percentile", c.detector.calibration_percentile},
        {"repetitions", c.detector.repetitions}}},
  };
}

json default_config_json() { return to_json(ExperimentConfig{}); }

json merge_config(const json& base, const json& overrides) {
  if (!overrides.is_object()) fail(ErrorCode::kConfig, "config must be a JSON object");
  json out = base;
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    if (!out.contains(it.key())) fail(ErrorCode::kConfig, "unknown config key '" + it.key() + "'");
    json& slot = out[it.key()];
    if (slot.is_object()) {
      slot = merge_config(slot, it.value());
    } else {
      slot = it.value();
    }
  }
  return out;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail(ErrorCode::kConfig, "override must look like key.path=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &config;
  const auto keys = split(path, '.');
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!node->is_object() || !node->contains(keys[i])) {
      fail(ErrorCode::kConfig, "unknown config key '" + path + "'");
    }
    node = &(*node)[keys[i]];
  }
  if (node->is_object()) fail(ErrorCode::kConfig, "'" + path + "' is a section, not a value");
  *node = std::move(value);
}

ExperimentConfig parse_config(const json& j) {
  const json full = merge_config(default_config_json(), j);
  ExperimentConfig c;
  read(full, "seed", c.seed);
  std::string out;
  read(full, "out", out);
  c.out = out;

  const json& d = full.at("data");
  read(d, "train_per_class", c.data.train_per_class);
  read(d, "test_per_class", c.data.test_per_class);
  read(d, "image_size", c.data.image_size);
  require(c.data.train_per_class >= 1 && c.data.test_per_class >= 1, "data counts must be >= 1");
  require(c.data.image_size >= 32, "data.image_size must be >= 32");

  const json& k = full.at("classifier");
  read(k, "learning_rate", c.classifier.learning_rate);
  read(k, "halve_every_epochs", c.classifier.halve_every_epochs);
  read(k, "momentum", c.classifier.momentum);
  read(k, "batch_size", c.classifier.batch_size);
  read(k, "epochs", c.classifier.epochs);
  require(c.classifier.learning_rate > 0.0, "classifier.learning_rate must be positive");
  require(c.classifier.halve_every_epochs >= 1, "classifier.halve_every_epochs must be >= 1");
  require(c.classifier.momentum >= 0.0 && c.classifier.momentum < 1.0, "classifier.momentum must be in [0,1)");
  require(c.classifier.batch_size >= 1 && c.classifier.epochs >= 1, "classifier batch/epochs must be >= 1");

  const json& ds = full.at("distortion");
  read(ds, "subset", c.distortion.subset);
  read(ds, "blur_sigma", c.distortion.blur_sigma);
  read(ds, "noise_sigma", c.distortion.noise_sigma);
  read(ds, "jpeg_multiplier", c.distortion.jpeg_multiplier);
  read(ds, "jp2k_keep", c.distortion.jp2k_keep);
  require(c.distortion.subset >= 1, "distortion.subset must be >= 1");
  require(c.distortion.blur_sigma[0] > 0.0 && ladder_ok(c.distortion.blur_sigma, true),
          "distortion.blur_sigma must be positive and increasing");
  require(c.distortion.noise_sigma[0] > 0.0 && ladder_ok(c.distortion.noise_sigma, true),
          "distortion.noise_sigma must be positive and increasing");
  require(c.distortion.jpeg_multiplier[0] > 0.0 && ladder_ok(c.distortion.jpeg_multiplier, true),
          "distortion.jpeg_multiplier must be positive and increasing");
  require(c.distortion.jp2k_keep[0] <= 1.0 && c.distortion.jp2k_keep[4] > 0.0 &&
              ladder_ok(c.distortion.jp2k_keep, false),
          "distortion.jp2k_keep must lie in (0,1] and decrease");

  const json& q = full.at("iqa");
  read(q, "source_images", c.iqa.source_images);
  read(q, "learning_rate", c.iqa.learning_rate);
  read(q, "momentum", c.iqa.momentum);
  read(q, "batch_size", c.iqa.batch_size);
  read(q, "epochs", c.iqa.epochs);
  read(q, "hidden", c.iqa.hidden);
  read(q, "target_sigma_bins", c.iqa.target_sigma_bins);
  read(q, "patch_size", c.iqa.patch_size);
  read(q, "patch_stride", c.iqa.patch_stride);
  require(c.iqa.source_images >= 1, "iqa.source_images must be >= 1");
  require(c.iqa.learning_rate > 0.0 && c.iqa.momentum >= 0.0 && c.iqa.momentum < 1.0,
          "iqa learning rate / momentum out of range");
  require(c.iqa.batch_size >= 1 && c.iqa.epochs >= 1, "iqa batch/epochs must be >= 1");
  for (int h : c.iqa.hidden) require(h >= 1, "iqa.hidden sizes must be >= 1");
  require(c.iqa.target_sigma_bins > 0.0, "iqa.target_sigma_bins must be positive");
  require(c.iqa.patch_size >= 32 && c.iqa.patch_size <= c.data.image_size && c.iqa.patch_stride >= 1,
          "iqa patch must be between 32 and the image size, stride >= 1");

  const json& a = full.at("attack");
  read(a, "fgsm_epsilon", c.attack.fgsm_epsilon);
  read(a, "deepfool_max_iter", c.attack.deepfool_max_iter);
  read(a, "deepfool_overshoot", c.attack.deepfool_overshoot);
  read(a, "deepfool_probe_images", c.attack.deepfool_probe_images);
  read(a, "uap_xi", c.attack.uap_xi);
  read(a, "uap_target_fool_rate", c.attack.uap_target_fool_rate);
  read(a, "uap_max_epochs", c.attack.uap_max_epochs);
  read(a, "uap_train_images", c.attack.uap_train_images);
  read(a, "adversarial_count", c.attack.adversarial_count);
  read(a, "fooling_count", c.attack.fooling_count);
  read(a, "fool_alpha", c.attack.fool_alpha);
  read(a, "fool_confidence", c.attack.fool_confidence);
  read(a, "fool_max_iter", c.attack.fool_max_iter);
  require(c.attack.fgsm_epsilon >= 0.0, "attack.fgsm_epsilon must be >= 0");
  require(c.attack.deepfool_max_iter >= 1 && c.attack.deepfool_overshoot >= 0.0, "deepfool options out of range");
  require(c.attack.deepfool_probe_images >= 1, "attack.deepfool_probe_images must be >= 1");
  require(c.attack.uap_xi >= 0.0 && c.attack.uap_xi <= 1.0, "attack.uap_xi must be in [0,1]");
  require(c.attack.uap_target_fool_rate > 0.0 && c.attack.uap_target_fool_rate <= 1.0,
          "attack.uap_target_fool_rate must be in (0,1]");
  require(c.attack.uap_max_epochs >= 1, "attack.uap_max_epochs must be >= 1");
  require(c.attack.uap_train_images >= 100, "attack.uap_train_images must be >= 100");
  require(c.attack.uap_train_images <= c.data.train_per_class * 10,
          "attack.uap_train_images exceeds the training split");
  require(c.attack.adversarial_count >= 2, "attack.adversarial_count must be >= 2");
  require(c.attack.fooling_count >= 1, "attack.fooling_count must be >= 1");
  require(c.attack.fool_alpha > 0.0, "attack.fool_alpha must be positive");
  require(c.attack.fool_confidence > 0.0 && c.attack.fool_confidence <= 1.0, "attack.fool_confidence must be in (0,1]");
  require(c.attack.fool_max_iter >= 1, "attack.fool_max_iter must be >= 1");

  const json& t = full.at("detector");
  read(t, "C", c.detector.C);
  read(t, "gamma", c.detector.gamma);
  read(t, "tol", c.detector.tol);
  read(t, "max_passes", c.detector.max_passes);
  read(t, "tau", c.detector.tau);
  read(t, "calibration_percentile", c.detector.calibration_percentile);
  read(t, "repetitions", c.detector.repetitions);
  require(c.detector.C > 0.0 && c.detector.gamma > 0.0 && c.detector.tol > 0.0, "detector C/gamma/tol must be positive");
  require(c.detector.max_passes >= 1, "detector.max_passes must be >= 1");
  require(c.detector.tau >= 0.0 && c.detector.tau <= 1.0, "detector.tau must be in [0,1]");
  require(c.detector.calibration_percentile >= 0.0 && c.detector.calibration_percentile <= 100.0,
          "detector.calibration_percentile must be in [0,100]");
  require(c.detector.repetitions >= 1, "detector.repetitions must be >= 1");
  return c;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "cannot parse config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace fitgate::pipeline
