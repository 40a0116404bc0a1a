#include <map>
#include <set>

#include "artifacts.hpp"
#include "fitgate/core/error.hpp"
#include "fitgate/core/stats.hpp"
#include "fitgate/core/text.hpp"
#include "fitgate/datagen/shapes.hpp"
#include "fitgate/detector/detector.hpp"
#include "fitgate/pipeline/stages.hpp"
#include "fitgate/semantics/taxonomy.hpp"

namespace fitgate::pipeline {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GateSpec {
  std::string name;
  detector::Gate gate;
};

json metrics_json(const detector::GroupMetrics& m) {
  json j{{"count", m.count},
         {"unfit", m.unfit},
         {"fit", m.fit},
         {"fit_correct", m.fit_correct},
         {"detection_rate", m.detection_rate}};
  if (m.fit_accuracy) j["fit_accuracy"] = *m.fit_accuracy;
  if (m.false_alarm) j["false_alarm"] = *m.false_alarm;
  return j;
}

// Summary Stats over the per-repetition values of each metric.
json summarize_repetitions(const json& per_rep) {
  json out = json::object();
  for (const char* key : {"detection_rate", "fit_accuracy", "false_alarm"}) {
    std::vector<double> v;
    for (const auto& r : per_rep) {
      if (r.contains(key)) v.push_back(r.at(key).get<double>());
    }
    if (!v.empty()) out[key] = summarize(v);
  }
  return out;
}

std::string cell(double v) { return format_double(v); }

}  // namespace

void run_evaluate(const ExperimentConfig& config, const Layout& layout, const Logger& log) {
  detail::require_artifact(layout.detector_protocol(), Stage::kTrainDetector);
  detail::require_artifact(layout.iqa_history(), Stage::kTrainIqa);
  const auto rows = detail::read_feature_rows(layout);
  const json protocol = detail::read_json(layout.detector_protocol());
  const double calibrated = detail::read_json(layout.iqa_history()).at("calibrated_tau").get<double>();
  const auto& reps = protocol.at("repetitions");

  json gates = json::object();
  std::map<std::string, std::map<std::string, json>> per_rep;  // gate -> group -> array
  for (std::size_t r = 0; r < reps.size(); ++r) {
    detail::require_artifact(layout.detector_model(static_cast<int>(r)), Stage::kTrainDetector);
    std::set<std::string> train_originals, test_adversarials;
    for (const auto& p : reps[r].at("train_pairs")) train_originals.insert(p.at(0).get<std::string>());
    for (const auto& p : reps[r].at("test_pairs")) test_adversarials.insert(p.at(1).get<std::string>());

    std::vector<detector::EvalGroup> groups;
    for (const char* name : detail::kGroups) {
      detector::EvalGroup g;
      g.name = name;
      g.has_labels = g.name != "fooling";
      g.is_original = g.name == "original";
      for (const auto& row : rows) {
        if (row.group != g.name) continue;
        bool keep = true;
        if (g.name == "original") keep = !train_originals.count(row.image_id);
        if (g.name == "distorted") keep = !train_originals.count(row.source_id);
        if (g.name == "adversarial") keep = test_adversarials.count(row.image_id) > 0;
        if (keep) g.items.push_back({row.feature, row.true_class, row.predicted_class});
      }
      groups.push_back(std::move(g));
    }

    const std::vector<GateSpec> specs{
        {"baseline1", detector::NoGate{}},
        {"baseline2", detector::ThresholdGate{config.detector.tau}},
        {"baseline2_calibrated", detector::ThresholdGate{calibrated}},
        {"detector", detector::load_svm(layout.detector_model(static_cast<int>(r)))},
    };
    for (const auto& spec : specs) {
      for (const auto& m : detector::evaluate_detector(spec.gate, groups)) {
        per_rep[spec.name][m.group].push_back(metrics_json(m));
      }
    }
  }

  for (auto& [gate, groups] : per_rep) {
    json g = json::object();
    for (auto& [group, arr] : groups) g[group] = {{"per_repetition", arr}, {"summary", summarize_repetitions(arr)}};
    gates[gate] = g;
  }
  detail::write_json(layout.evaluation(), {{"repetitions", reps.size()},
                                           {"tau", config.detector.tau},
                                           {"calibrated_tau", calibrated},
                                           {"gates", gates}});
  if (log) {
    const auto& adv = gates["detector"]["adversarial"]["summary"]["detection_rate"];
    const auto& base = gates["baseline2"]["adversarial"]["summary"]["detection_rate"];
    log("evaluate: adversarial detection detector " + format_double(adv.at("mean").get<double>()) +
        " vs threshold " + format_double(base.at("mean").get<double>()));
  }
}

void run_report(const ExperimentConfig& config, const Layout& layout, const Logger& log) {
  detail::require_artifact(layout.evaluation(), Stage::kEvaluate);
  detail::require_artifact(layout.classifier_history(), Stage::kTrainClassifier);
  detail::require_artifact(layout.iqa_history(), Stage::kTrainIqa);
  detail::require_artifact(layout.attack_stats(), Stage::kGenAdversarial);
  detail::require_artifact(layout.detector_protocol(), Stage::kTrainDetector);
  detail::require_artifact(layout.test_predictions_csv(), Stage::kExtractFeatures);
  fs::create_directories(layout.report_dir());
  const auto rows = detail::read_feature_rows(layout);
  const json evaluation = detail::read_json(layout.evaluation());
  const json classifier_history = detail::read_json(layout.classifier_history());
  const json iqa_history = detail::read_json(layout.iqa_history());
  const json attacks = detail::read_json(layout.attack_stats());
  const json protocol = detail::read_json(layout.detector_protocol());

  std::string tables =
      "table,gate,group,count,median,mean,std,detection_rate,fit_accuracy,false_alarm,wup_mean,mos_mean,accuracy\n";
  auto stats_row = [&](const std::string& table, const std::string& group, const Stats& s) {
    tables += table + ",," + group + "," + std::to_string(s.count) + "," + cell(s.median) + "," + cell(s.mean) + "," +
              cell(s.std) + ",,,,,,\n";
  };

  // Quality (MOS) and confidence (top-1) statistics per group.
  json quality = json::object(), confidence = json::object();
  for (const char* group : detail::kGroups) {
    std::vector<double> mos, top1;
    for (const auto& r : rows) {
      if (r.group != group) continue;
      mos.push_back(r.feature[5]);
      top1.push_back(r.feature[0]);
    }
    if (mos.empty()) fail(ErrorCode::kEmptyInput, std::string("report: group '") + group + "' has no images");
    quality[group] = summarize(mos);
    confidence[group] = summarize(top1);
  }
  for (const char* group : detail::kGroups) stats_row("quality_stats", group, quality[group].get<Stats>());
  for (const char* group : detail::kGroups) stats_row("confidence_stats", group, confidence[group].get<Stats>());

  // Degradation by distortion kind and level, with the semantic similarity of
  // the prediction on the distorted image to the prediction on its source.
  const auto preds = read_csv(layout.test_predictions_csv());
  std::map<std::string, int> source_prediction;
  {
    const std::size_t id = preds.column("image_id"), pc = preds.column("predicted_class");
    for (const auto& p : preds.rows) source_prediction[p[id]] = std::stoi(p[pc]);
  }
  const auto tax = semantics::parse_taxonomy(datagen::builtin_taxonomy());
  const auto names = datagen::class_name_list();
  std::vector<int> pristine_cls, variant_cls;
  std::vector<std::string> keys;
  std::vector<double> mos;
  std::map<std::string, std::pair<std::size_t, std::size_t>> correct;  // key -> (correct, total)
  std::vector<std::string> key_order;
  for (const auto& r : rows) {
    if (r.group != "distorted") continue;
    const auto it = source_prediction.find(r.source_id);
    if (it == source_prediction.end()) fail(ErrorCode::kFormat, "report: no prediction for source " + r.source_id);
    const std::string key = r.kind + "/L" + std::to_string(r.level);
    if (!correct.count(key)) key_order.push_back(key);
    pristine_cls.push_back(it->second);
    variant_cls.push_back(r.predicted_class);
    keys.push_back(key);
    mos.push_back(r.feature[5]);
    auto& c = correct[key];
    c.first += r.predicted_class == r.true_class;
    ++c.second;
  }
  const auto semantic = semantics::semantic_report(tax, names, pristine_cls, variant_cls, keys, mos);
  semantics::write_semantic_csv(semantic, layout.semantic_csv());

  std::map<std::string, std::vector<double>> mos_by_key;
  for (std::size_t i = 0; i < keys.size(); ++i) mos_by_key[keys[i]].push_back(mos[i]);
  json distortion_table = json::array();
  for (const auto& key : key_order) {
    const auto slash = key.find('/');
    const Stats& wup = semantic.groups.at(key);
    const Stats m = summarize(mos_by_key[key]);
    const double acc = static_cast<double>(correct[key].first) / static_cast<double>(correct[key].second);
    distortion_table.push_back({{"kind", key.substr(0, slash)},
                                {"level", std::stoi(key.substr(slash + 2))},
                                {"count", m.count},
                                {"mos", m},
                                {"wup", wup},
                                {"accuracy", acc}});
    tables += "semantic,," + key + "," + std::to_string(m.count) + "," + cell(wup.median) + "," + cell(wup.mean) +
              "," + cell(wup.std) + ",,,," + cell(wup.mean) + "," + cell(m.mean) + "," + cell(acc) + "\n";
  }

  // Gate tables: averages over repetitions.
  json baselines = json::object(), detector_table = json::object();
  const auto& gates = evaluation.at("gates");
  for (const char* gate : {"baseline1", "baseline2", "baseline2_calibrated", "detector"}) {
    json table = json::object();
    for (const char* group : detail::kGroups) {
      const auto& summary = gates.at(gate).at(group).at("summary");
      json row = json::object();
      std::string line = std::string(std::string(gate) == "detector" ? "detector" : "baselines") + "," + gate + "," +
                         group + "," + std::to_string(gates.at(gate).at(group).at("per_repetition").size()) + ",,,,";
      for (const char* metric : {"detection_rate", "fit_accuracy", "false_alarm"}) {
        if (summary.contains(metric)) {
          row[metric] = summary.at(metric).at("mean");
          line += cell(summary.at(metric).at("mean").get<double>());
        }
        line += ",";
      }
      tables += line + ",,\n";
      table[group] = row;
    }
    if (std::string(gate) == "detector") {
      detector_table = table;
    } else {
      baselines[gate] = table;
    }
  }

  json training = json::array();
  for (const auto& r : protocol.at("repetitions")) training.push_back(r.at("training"));

  json iqa_summary = iqa_history;
  iqa_summary.erase("epochs");
  iqa_summary["final_loss"] = iqa_history.at("epochs").back().at("loss");

  const json report{
      {"config", to_json(config)},
      {"classifier", classifier_history},
      {"iqa", iqa_summary},
      {"attacks", attacks},
      {"distortion_table", distortion_table},
      {"quality_stats", quality},
      {"confidence_stats", confidence},
      {"baselines", baselines},
      {"detector", detector_table},
      {"detector_training", training},
      {"evaluation", evaluation},
  };
  detail::write_json(layout.report_json(), report);
  write_text_file(layout.tables_csv(), tables);
  if (log) log("report: wrote " + layout.report_json().string());
}

}  // namespace fitgate::pipeline
