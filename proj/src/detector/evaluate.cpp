#include <map>

#include "fitgate/core/error.hpp"
#include "fitgate/detector/detector.hpp"

namespace fitgate::detector {

EvalItem make_eval_item(const classifier::Network& net, const iqa::IqaModel& iqa_model,
                        const Image& image, int true_class) {
  const auto pred = classifier::forward(net, image);
  EvalItem item;
  item.feature = assemble_feature(pred, iqa::predict_mos(iqa_model, image));
  item.true_class = true_class;
  item.predicted_class = pred.argmax();
  return item;
}

bool gate_rejects(const Gate& gate, const FitFeature& feature) {
  if (std::holds_alternative<NoGate>(gate)) return false;
  if (const auto* t = std::get_if<ThresholdGate>(&gate)) {
    return iqa::threshold_gate(iqa::mos_from_normalized(feature[5]), t->tau) == iqa::Verdict::kUnfit;
  }
  return svm_classify(std::get<SvmModel>(gate), feature).label == kUnfit;
}

std::vector<GroupMetrics> evaluate_detector(const Gate& gate, std::span<const EvalGroup> groups) {
  std::vector<GroupMetrics> out;
  for (const auto& g : groups) {
    if (g.items.empty()) fail(ErrorCode::kEmptyInput, "evaluate_detector: group '" + g.name + "' is empty");
    GroupMetrics m;
    m.group = g.name;
    m.count = g.items.size();
    for (const auto& item : g.items) {
      if (gate_rejects(gate, item.feature)) {
        ++m.unfit;
      } else {
        ++m.fit;
        if (g.has_labels && item.predicted_class == item.true_class) ++m.fit_correct;
      }
    }
    m.detection_rate = static_cast<double>(m.unfit) / static_cast<double>(m.count);
    // With nothing accepted there is no accuracy to speak of.
    if (g.has_labels && m.fit > 0) {
      m.fit_accuracy = static_cast<double>(m.fit_correct) / static_cast<double>(m.fit);
    }
    if (g.is_original) m.false_alarm = m.detection_rate;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Pair> pair_by_source(std::span<const std::string> adversarial_sources,
                                 std::span<const std::string> original_sources) {
  std::map<std::string, std::size_t> originals;
  for (std::size_t i = 0; i < original_sources.size(); ++i) {
    if (!originals.emplace(original_sources[i], i).second) {
      fail(ErrorCode::kUnpairedItems, "original source '" + original_sources[i] + "' appears twice");
    }
  }
  if (adversarial_sources.size() != original_sources.size()) {
    fail(ErrorCode::kUnpairedItems, "adversarial and original item counts differ");
  }
  std::vector<Pair> pairs;
  std::map<std::string, bool> used;
  for (std::size_t i = 0; i < adversarial_sources.size(); ++i) {
    const auto it = originals.find(adversarial_sources[i]);
    if (it == originals.end()) {
      fail(ErrorCode::kUnpairedItems, "adversarial source '" + adversarial_sources[i] + "' has no original");
    }
    if (used[adversarial_sources[i]]) {
      fail(ErrorCode::kUnpairedItems, "adversarial source '" + adversarial_sources[i] + "' appears twice");
    }
    used[adversarial_sources[i]] = true;
    pairs.push_back({it->second, i});
  }
  return pairs;
}

std::vector<PairedSplit> paired_split_protocol(std::span<const std::string> adversarial_sources,
                                               std::span<const std::string> original_sources,
                                               int repetitions, std::uint64_t seed) {
  if (repetitions < 1) fail(ErrorCode::kInvalidArgument, "paired_split_protocol: repetitions must be >= 1");
  const auto pairs = pair_by_source(adversarial_sources, original_sources);
  std::vector<PairedSplit> out;
  for (int r = 0; r < repetitions; ++r) {
    RandomStream rng = derive_stream(seed, static_cast<std::uint64_t>(r));
    const auto order = shuffled_indices(pairs.size(), rng);
    PairedSplit split;
    const std::size_t half = pairs.size() / 2;
    for (std::size_t i = 0; i < order.size(); ++i) (i < half ? split.train : split.test).push_back(pairs[order[i]]);
    out.push_back(std::move(split));
  }
  return out;
}

}  // namespace fitgate::detector
