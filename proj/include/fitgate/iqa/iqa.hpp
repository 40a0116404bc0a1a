#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "fitgate/core/image.hpp"
#include "fitgate/core/random.hpp"
#include "fitgate/core/scaler.hpp"
#include "json.hpp"

namespace fitgate::iqa {

// ---------------------------------------------------------------------------
// Natural scene statistics

// Mean-subtracted contrast-normalised coefficients with a 7x7 Gaussian window
// (sigma 7/6, reflect-101 borders) and C = 1/255. Needs both sides >= 16.
Grid compute_mscn(const Grid& image);
inline Grid compute_mscn(const Image& image) { return compute_mscn(image.grid()); }

struct GgdFit {
  double gamma = 0.0;
  double sigma2 = 0.0;
};

struct AggdFit {
  double alpha = 0.0;
  double eta = 0.0;
  double sigma_l2 = 0.0;
  double sigma_r2 = 0.0;
};

// r(g) = Gamma(2/g)^2 / (Gamma(1/g) Gamma(3/g)).
double ggd_ratio(double gamma);
// Table entry (g = 0.2, 0.201, ..., 10.0) whose ratio is closest to `ratio`;
// ties resolve to the smaller g.
double match_shape(double ratio);

inline constexpr std::size_t kMinFitSamples = 100;

// Moment-matching fits. fit_ggd throws kDegenerateSamples for fewer than 100
// samples or all zeros; fit_aggd additionally when one side is empty.
GgdFit fit_ggd(std::span<const double> samples);
AggdFit fit_aggd(std::span<const double> samples);

inline constexpr std::size_t kNssSize = 36;
using NssFeature = std::array<double, kNssSize>;

// Per scale (full, then 2x2-mean half scale): GGD (gamma, sigma2) of the MSCN
// map, then AGGD (alpha, eta, sigma_l2, sigma_r2) of its horizontal, vertical,
// main-diagonal and anti-diagonal neighbour products. Needs both sides >= 32.
// A flat region has no shape to fit: its GGD becomes (2, 0) and an AGGD side
// with no samples gets (alpha 2, eta 0) with that side's variance 0.
NssFeature extract_nss(const Grid& image);
inline NssFeature extract_nss(const Image& image) { return extract_nss(image.grid()); }

// ---------------------------------------------------------------------------
// Patch pooling

inline constexpr int kBins = 70;

struct PatchGeometry {
  int size = 32;
  int stride = 16;
};

// Top-left corners of every patch, row-major.
std::vector<std::pair<int, int>> patch_origins(int width, int height, const PatchGeometry& geom);
std::vector<NssFeature> patch_features(const Image& image, const PatchGeometry& geom);

struct MosScore {
  double raw_q = 1.0;       // in [1, 70]
  double normalized = 0.0;  // (raw_q - 1) / 69
};

// q = (1/p) sum_i sum_j j * v_ij over p patch distributions of kBins entries.
MosScore pool_mos(std::span<const std::vector<double>> distributions);
MosScore mos_from_normalized(double normalized);

// Discretised Gaussian over bins 1..70 centred on 1 + round(69 * mos),
// renormalised.
std::vector<double> soft_target(double mos, double sigma_bins = 2.0);

// ---------------------------------------------------------------------------
// Regressor

// Fully connected ReLU network ending in softmax; sizes = {in, hidden..., out}.
struct Mlp {
  std::vector<int> sizes;
  std::vector<std::vector<double>> weights;  // [out][in]
  std::vector<std::vector<double>> biases;

  static Mlp zeros(std::vector<int> sizes);
  void init_he(RandomStream& rng);
  std::size_t layer_count() const { return weights.size(); }
};

// Softmax outputs, one row of sizes.back() per input row.
std::vector<double> mlp_forward(const Mlp& net, std::span<const double> inputs, std::size_t batch);
// Mean cross-entropy against soft targets (batch x out) and its parameter
// gradients.
double mlp_loss_and_gradients(const Mlp& net, std::span<const double> inputs,
                              std::span<const double> targets, std::size_t batch,
                              Mlp& gradients);

struct IqaModel {
  Mlp mlp;
  Scaler scaler;
  PatchGeometry geometry;
};

struct IqaHyper {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 20;
  std::vector<int> hidden{64, 64};
  double target_sigma_bins = 2.0;
  PatchGeometry geometry;
};

struct IqaEpoch {
  int epoch = 0;
  double loss = 0.0;
};

struct IqaTrainResult {
  IqaModel model;
  std::vector<IqaEpoch> history;
};

// Proxy quality label for a pristine image (level 0) or a distortion level.
double proxy_mos(int level);

// Per-patch training: each patch inherits its image's label. Parameters from
// derive_stream(seed, 0); epoch e shuffles with derive_stream(seed, 1 + e).
IqaTrainResult train_iqa(std::span<const Image> images, std::span<const double> labels,
                         const IqaHyper& hyper, std::uint64_t seed,
                         const std::function<void(const IqaEpoch&)>& on_epoch = {});

// Same, from precomputed per-image patch features.
IqaTrainResult train_iqa_features(std::span<const std::vector<NssFeature>> features,
                                  std::span<const double> labels, const IqaHyper& hyper,
                                  std::uint64_t seed,
                                  const std::function<void(const IqaEpoch&)>& on_epoch = {});

MosScore predict_mos(const IqaModel& model, const Image& image);
MosScore predict_mos_features(const IqaModel& model, std::span<const NssFeature> features);

// ---------------------------------------------------------------------------
// Gating

enum class Verdict { kFit, kUnfit };

// Unfit iff normalized < tau. Throws kDomain unless tau is in [0,1].
Verdict threshold_gate(const MosScore& mos, double tau = 0.3);
// tau = q-th percentile (default 5th) of pristine scores.
double calibrate_threshold(std::span<const double> pristine_normalized, double q = 5.0);

nlohmann::json to_json(const IqaModel& model);
IqaModel iqa_model_from_json(const nlohmann::json& j);
void save_iqa_model(const IqaModel& model, const std::filesystem::path& path);
IqaModel load_iqa_model(const std::filesystem::path& path);

}  // namespace fitgate::iqa
