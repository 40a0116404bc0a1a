#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>

#include "fitgate/classifier/network.hpp"
#include "fitgate/core/image.hpp"
#include "fitgate/core/random.hpp"
#include "json.hpp"

namespace fitgate::adversarial {

using classifier::Network;

struct AttackResult {
  Image adversarial;
  bool success = false;
  int iterations = 0;
  int original_class = -1;
  int adversarial_class = -1;
};

// x' = clamp(x + eps * sign(grad of cross-entropy at `label`)), sign(0) = 0.
AttackResult fgsm(const Network& net, const Image& image, int label, double epsilon);

struct DeepFoolOptions {
  int max_iter = 50;
  double overshoot = 0.02;
};

// Untargeted multiclass DeepFool. The iterate is clamp(x + (1 + overshoot) r)
// where r accumulates the linearised minimal steps. When `reference_class` is
// given and the image is already not classified as it, returns immediately.
AttackResult deepfool(const Network& net, const Image& image, const DeepFoolOptions& options = {},
                      std::optional<int> reference_class = std::nullopt);

// Unclamped perturbation (1 + overshoot) * r from the last DeepFool run, for
// callers that accumulate it (universal perturbation).
struct DeepFoolStep {
  AttackResult result;
  Grid perturbation;
};
DeepFoolStep deepfool_step(const Network& net, const Image& image, const DeepFoolOptions& options = {});

struct PerturbationMap {
  Grid values;
  double xi = 0.0;
  double fooling_rate = 0.0;  // on the images it was fitted to
  int epochs = 0;
};

struct UniversalOptions {
  double xi = 0.1;
  double target_fool_rate = 0.7;
  int max_epochs = 10;
  DeepFoolOptions deepfool;
};

Image apply_perturbation(const Image& image, const Grid& v);
// Fraction of images whose argmax changes under v.
double fooling_rate(const Network& net, std::span<const Image> images, const Grid& v);

// Needs at least 100 images. Each epoch visits the images in a seeded order
// and folds a DeepFool step into v for every image v does not fool yet,
// projecting onto the l-infinity ball of radius xi.
PerturbationMap universal_perturbation(const Network& net, std::span<const Image> images,
                                       const UniversalOptions& options, std::uint64_t seed);

struct FoolOptions {
  double alpha = 0.05;
  double confidence_target = 0.99;
  int max_iter = 2000;
  double init_noise = 0.05;
};

// Gradient ascent on the target logit from a noisy copy of mean_image.
AttackResult gradient_ascent_fool(const Network& net, int target_class, const Image& mean_image,
                                  const FoolOptions& options, std::uint64_t seed);

Image mean_image(std::span<const Image> images);

// Uniform choice among the classes other than true_class.
int random_other_class(int true_class, int class_count, RandomStream& rng);

nlohmann::json to_json(const PerturbationMap& map);
PerturbationMap perturbation_from_json(const nlohmann::json& j);
void save_perturbation(const PerturbationMap& map, const std::filesystem::path& path);
PerturbationMap load_perturbation(const std::filesystem::path& path);

}  // namespace fitgate::adversarial
