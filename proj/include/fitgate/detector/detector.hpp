#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fitgate/classifier/network.hpp"
#include "fitgate/core/scaler.hpp"
#include "fitgate/iqa/iqa.hpp"
#include "json.hpp"

namespace fitgate::detector {

inline constexpr std::size_t kFeatureSize = 6;
// p1 >= ... >= p5 (top-5 softmax probabilities), then normalised MOS.
using FitFeature = std::array<double, kFeatureSize>;

FitFeature assemble_feature(const classifier::PredictionVector& pred, const iqa::MosScore& mos);

inline constexpr int kFit = +1;
inline constexpr int kUnfit = -1;

// ---------------------------------------------------------------------------
// RBF support vector machine

struct SvmHyper {
  double C = 10.0;
  double gamma = 1.0 / 6.0;
  double tol = 1e-3;
  int max_passes = 20;
  int max_full_passes = 1000;  // safety cap on the outer loop
};

struct SupportVector {
  double alpha_y = 0.0;
  std::vector<double> vector;  // standardised
  std::size_t train_index = 0;
};

struct SvmModel {
  double C = 10.0;
  double gamma = 1.0 / 6.0;
  Scaler scaler;
  std::vector<SupportVector> support;
  double bias = 0.0;
};

struct SvmTrainResult {
  SvmModel model;
  std::vector<double> alphas;  // one per training row
  int full_passes = 0;
  bool converged = false;
  double train_accuracy = 0.0;
};

// SMO on the dual with an RBF kernel over features standardised by a scaler
// fitted to `features`. Labels are +1 (fit) or -1 (unfit); both must occur.
SvmTrainResult train_svm(std::span<const std::vector<double>> features, std::span<const int> labels,
                         const SvmHyper& hyper, std::uint64_t seed);

struct Decision {
  int label = kFit;
  double value = 0.0;
};

// f(x) = sum alpha_i y_i K(sv_i, scale(x)) + b; fit iff f(x) >= 0.
Decision svm_classify(const SvmModel& model, std::span<const double> feature);

struct KktSummary {
  std::size_t violations = 0;
  double max_violation = 0.0;
  double dual_equality = 0.0;  // |sum alpha_i y_i|
  bool box_ok = true;
};

KktSummary check_kkt(const SvmModel& model, std::span<const std::vector<double>> features,
                     std::span<const int> labels, std::span<const double> alphas, double tol);

nlohmann::json to_json(const SvmModel& model);
SvmModel svm_from_json(const nlohmann::json& j);
void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalItem {
  FitFeature feature{};
  int true_class = -1;  // -1 when undefined (fooling images)
  int predicted_class = -1;
};

EvalItem make_eval_item(const classifier::Network& net, const iqa::IqaModel& iqa_model,
                        const Image& image, int true_class);

struct NoGate {};
struct ThresholdGate {
  double tau = 0.3;
};
using Gate = std::variant<NoGate, ThresholdGate, SvmModel>;

// True when the gate rejects the item.
bool gate_rejects(const Gate& gate, const FitFeature& feature);

struct GroupMetrics {
  std::string group;
  std::size_t count = 0;
  std::size_t unfit = 0;
  std::size_t fit = 0;
  std::size_t fit_correct = 0;
  double detection_rate = 0.0;          // unfit / count
  std::optional<double> fit_accuracy;   // correct among fit; absent without labels or fit items
  std::optional<double> false_alarm;    // originals only
};

struct EvalGroup {
  std::string name;
  std::vector<EvalItem> items;
  bool has_labels = true;
  bool is_original = false;
};

std::vector<GroupMetrics> evaluate_detector(const Gate& gate, std::span<const EvalGroup> groups);

// ---------------------------------------------------------------------------
// Paired split protocol

struct Pair {
  std::size_t original = 0;     // index into the original items
  std::size_t adversarial = 0;  // index into the adversarial items
};

// Pairs adversarial and original items by source id, ordered by adversarial
// index. Anything without exactly one partner raises kUnpairedItems.
std::vector<Pair> pair_by_source(std::span<const std::string> adversarial_sources,
                                 std::span<const std::string> original_sources);

struct PairedSplit {
  std::vector<Pair> train;
  std::vector<Pair> test;
};

// Repetition r shuffles the pairs with derive_stream(seed, r); the first half
// (rounded down) trains and the rest tests, so a pair never straddles sets.
std::vector<PairedSplit> paired_split_protocol(std::span<const std::string> adversarial_sources,
                                               std::span<const std::string> original_sources,
                                               int repetitions, std::uint64_t seed);

}  // namespace fitgate::detector
