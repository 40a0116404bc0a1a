#include "fitgate/pipeline/stages.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <map>
#include <set>

#include "artifacts.hpp"
#include "fitgate/adversarial/attacks.hpp"
#include "fitgate/classifier/network.hpp"
#include "fitgate/core/error.hpp"
#include "fitgate/core/parallel.hpp"
#include "fitgate/core/stats.hpp"
#include "fitgate/core/text.hpp"
#include "fitgate/datagen/shapes.hpp"
#include "fitgate/detector/detector.hpp"
#include "fitgate/distortion/distort.hpp"
#include "fitgate/iqa/iqa.hpp"

namespace fitgate::pipeline {

// Implemented in report.cpp.
void run_evaluate(const ExperimentConfig& config, const Layout& layout, const Logger& log);
void run_report(const ExperimentConfig& config, const Layout& layout, const Logger& log);

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::array<Stage, 9> kStages{Stage::kGenData,        Stage::kTrainClassifier, Stage::kTrainIqa,
                                       Stage::kGenDistortions, Stage::kGenAdversarial,  Stage::kExtractFeatures,
                                       Stage::kTrainDetector,  Stage::kEvaluate,        Stage::kReport};

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::vector<Image> load_images(const fs::path& base, const std::vector<std::string>& paths) {
  std::vector<Image> out(paths.size());
  parallel_for(paths.size(), [&](std::size_t i) { out[i] = load_image(base / paths[i]); });
  return out;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

distortion::Ladder ladder_of(const DistortionConfig& d) {
  return {d.blur_sigma, d.noise_sigma, d.jpeg_multiplier, d.jp2k_keep};
}

iqa::IqaHyper iqa_hyper_of(const IqaConfig& q) {
  iqa::IqaHyper h;
  h.learning_rate = q.learning_rate;
  h.momentum = q.momentum;
  h.batch_size = q.batch_size;
  h.epochs = q.epochs;
  h.hidden = q.hidden;
  h.target_sigma_bins = q.target_sigma_bins;
  h.geometry = {q.patch_size, q.patch_stride};
  return h;
}

// Items of one split, in manifest order, with their run-root relative paths.
struct SplitItems {
  std::vector<std::string> paths;  // relative to the run root
  std::vector<int> labels;
};

SplitItems split_items(const datagen::Dataset& ds, datagen::Split split) {
  SplitItems out;
  for (const auto& item : ds.split_items(split)) {
    out.paths.push_back("data/" + item.path);
    out.labels.push_back(item.class_id);
  }
  return out;
}

datagen::Dataset load_data(const Layout& layout) {
  detail::require_artifact(layout.data_manifest(), Stage::kGenData);
  return datagen::load_dataset(layout.data_manifest());
}

classifier::Network load_classifier(const Layout& layout) {
  detail::require_artifact(layout.classifier_model(), Stage::kTrainClassifier);
  return classifier::load_network(layout.classifier_model());
}

iqa::IqaModel load_iqa(const Layout& layout) {
  detail::require_artifact(layout.iqa_model(), Stage::kTrainIqa);
  return iqa::load_iqa_model(layout.iqa_model());
}

// -------------------------------------------------------------------------

void gen_data(const ExperimentConfig& c, const Layout& layout, const Logger& log) {
  const auto ds = datagen::generate_dataset(c.data.train_per_class, c.data.test_per_class, c.seed,
                                            layout.data_dir(), c.data.image_size);
  say(log, "gen-data: " + std::to_string(ds.items.size()) + " images");
}

void train_classifier_stage(const ExperimentConfig& c, const Layout& layout, const Logger& log) {
  const auto ds = load_data(layout);
  const auto train = split_items(ds, datagen::Split::kTrain);
  const auto test = split_items(ds, datagen::Split::kTest);
  const auto train_images = load_images(layout.root, train.paths);

  classifier::TrainHyper hyper;
  hyper.learning_rate = c.classifier.learning_rate;
  hyper.halve_every_epochs = c.classifier.halve_every_epochs;
  hyper.momentum = c.classifier.momentum;
  hyper.batch_size = c.classifier.batch_size;
  hyper.epochs = c.classifier.epochs;

  const auto initial = classifier::Network::make_default(c.data.image_size, datagen::kClassCount);
  const auto result = classifier::train_classifier(
      train_images, train.labels, hyper, stage_seed(c.seed, Stage::kTrainClassifier), initial,
      [&](const classifier::EpochRecord& r) {
        say(log, "train-classifier: epoch " + std::to_string(r.epoch + 1) + " loss " + format_double(r.loss) +
                     " acc " + format_double(r.accuracy));
      });

  const auto test_images = load_images(layout.root, test.paths);
  const double test_acc = classifier::accuracy(result.net, test_images, test.labels);
  say(log, "train-classifier: test accuracy " + format_double(test_acc));

  json epochs = json::array();
  for (const auto& r : result.history) {
    epochs.push_back({{"epoch", r.epoch}, {"learning_rate", r.learning_rate}, {"loss", r.loss},
                      {"train_accuracy", r.accuracy}});
  }
  fs::create_directories(layout.classifier_model().parent_path());
  classifier::save_network(result.net, layout.classifier_model());
  detail::write_json(layout.classifier_history(),
                     {{"epochs", epochs},
                      {"train_images", train.paths.size()},
                      {"test_images", test.paths.size()},
                      {"test_accuracy", test_acc}});
}

void train_iqa_stage(const ExperimentConfig& c, const Layout& layout, const Logger& log) {
  const auto ds = load_data(layout);
  const auto train = split_items(ds, datagen::Split::kTrain);
  const std::uint64_t seed = stage_seed(c.seed, Stage::kTrainIqa);

  RandomStream pick = derive_stream(seed, 0);
  auto order = shuffled_indices(train.paths.size(), pick);
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(c.iqa.source_images)));
  std::sort(order.begin(), order.end());
  std::vector<std::string> paths;
  for (auto i : order) paths.push_back(train.paths[i]);
  const auto sources = load_images(layout.root, paths);

  const iqa::IqaHyper hyper = iqa_hyper_of(c.iqa);
  const auto ladder = ladder_of(c.distortion);
  constexpr std::size_t kVariants = 1 + distortion::kAllKinds.size() * distortion::kLevels;
  std::vector<std::vector<iqa::NssFeature>> features(sources.size() * kVariants);
  std::vector<double> labels(features.size());

  parallel_for(sources.size(), [&](std::size_t s) {
    const std::size_t base = s * kVariants;
    features[base] = iqa::patch_features(sources[s], hyper.geometry);
    labels[base] = iqa::proxy_mos(0);
    std::size_t v = 1;
    for (auto kind : distortion::kAllKinds) {
      for (int level = 1; level <= distortion::kLevels; ++level, ++v) {
        RandomStream rng = derive_stream(seed, 1 + base + v);
        const Image d = detail::quantize(distortion::distort(sources[s], {kind, level}, rng, ladder));
        features[base + v] = iqa::patch_features(d, hyper.geometry);
        labels[base + v] = iqa::proxy_mos(level);
      }
    }
  });
  say(log, "train-iqa: " + std::to_string(features.size()) + " training images");

  json epochs = json::array();
  const auto result = iqa::train_iqa_features(features, labels, hyper, seed, [&](const iqa::IqaEpoch& e) {
    epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}});
    say(log, "train-iqa: epoch " + std::to_string(e.epoch + 1) + " loss " + format_double(e.loss));
  });

  // Pristine training MOS drives the percentile-calibrated threshold.
  std::vector<double> pristine(sources.size());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    pristine[s] = iqa::predict_mos_features(result.model, features[s * kVariants]).normalized;
  }
  const double tau = iqa::calibrate_threshold(pristine, c.detector.calibration_percentile);
  say(log, "train-iqa: calibrated threshold " + format_double(tau));

  fs::create_directories(layout.iqa_model().parent_path());
  iqa::save_iqa_model(result.model, layout.iqa_model());
  detail::write_json(layout.iqa_history(), {{"epochs", epochs},
                                            {"source_images", sources.size()},
                                            {"training_images", features.size()},
                                            {"pristine_mos", summarize(pristine)},
                                            {"calibration_percentile", c.detector.calibration_percentile},
                                            {"calibrated_tau", tau}});
}

void gen_distortions(const ExperimentConfig& c, const Layout& layout, const Logger& log) {
  const auto ds = load_data(layout);
  const auto test = split_items(ds, datagen::Split::kTest);
  const std::uint64_t seed = stage_seed(c.seed, Stage::kGenDistortions);

  std::vector<std::size_t> chosen(test.paths.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (static_cast<std::size_t>(c.distortion.subset) < chosen.size()) {
    RandomStream pick = derive_stream(seed, 0);
    chosen = shuffled_indices(test.paths.size(), pick);
    chosen.resize(static_cast<std::size_t>(c.distortion.subset));
    std::sort(chosen.begin(), chosen.end());
  }
  const auto ladder = ladder_of(c.distortion);
  constexpr std::size_t kVariants = distortion::kAllKinds.size() * distortion::kLevels;

  for (auto kind : distortion::kAllKinds) {
    for (int level = 1; level <= distortion::kLevels; ++level) {
      fs::create_directories(layout.root / "distorted" / std::string(distortion::kind_name(kind)) /
                             ("L" + std::to_string(level)));
    }
  }
  std::vector<std::string> rows(chosen.size() * kVariants);
  parallel_for(chosen.size(), [&](std::size_t j) {
    const std::string& src = test.paths[chosen[j]];
    const Image image = load_image(layout.root / src);
    std::size_t v = 0;
    for (auto kind : distortion::kAllKinds) {
      for (int level = 1; level <= distortion::kLevels; ++level, ++v) {
        RandomStream rng = derive_stream(seed, 1 + chosen[j] * kVariants + v);
        const Image d = distortion::distort(image, {kind, level}, rng, ladder);
        const std::string kname(distortion::kind_name(kind));
        const std::string rel =
            "distorted/" + kname + "/L" + std::to_string(level) + "/" + stem_of(src) + ".pgm";
        save_image(d, layout.root / rel);
        rows[j * kVariants + v] = rel + "," + src + "," + kname + "," + std::to_string(level) + "\n";
      }
    }
  });
  std::string csv = "path,source_path,kind,level\n";
  for (const auto& r : rows) csv += r;
  write_text_file(layout.distorted_manifest(), csv);
  say(log, "gen-distortions: " + std::to_string(rows.size()) + " images from " +
               std::to_string(chosen.size()) + " sources");
}

struct RateCount {
  std::size_t attempts = 0;
  std::size_t successes = 0;
  double iterations = 0.0;
  json to_json() const {
    const double n = attempts == 0 ? 1.0 : static_cast<double>(attempts);
    return {{"attempts", attempts},
            {"successes", successes},
            {"success_rate", static_cast<double>(successes) / n},
            {"mean_iterations", iterations / n}};
  }
};

void gen_adversarial(const ExperimentConfig& c, const Layout& layout, const Logger& log) {
  const auto ds = load_data(layout);
  const auto net = load_classifier(layout);
  const auto train = split_items(ds, datagen::Split::kTrain);
  const auto test = split_items(ds, datagen::Split::kTest);
  const std::uint64_t seed = stage_seed(c.seed, Stage::kGenAdversarial);
  const auto& a = c.attack;

  const auto test_images = load_images(layout.root, test.paths);
  std::vector<int> test_pred(test_images.size());
  parallel_for(test_images.size(), [&](std::size_t i) { test_pred[i] = classifier::forward(net, test_images[i]).argmax(); });
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < test_images.size(); ++i) {
    if (test_pred[i] == test.labels[i]) correct.push_back(i);
  }
  RandomStream pick = derive_stream(seed, 0);
  const auto correct_order = shuffled_indices(correct.size(), pick);

  // Universal perturbation fitted on a slice of the training split.
  RandomStream uap_pick = derive_stream(seed, 1);
  auto uap_order = shuffled_indices(train.paths.size(), uap_pick);
  uap_order.resize(static_cast<std::size_t>(a.uap_train_images));
  std::sort(uap_order.begin(), uap_order.end());
  std::vector<std::string> uap_paths;
  for (auto i : uap_order) uap_paths.push_back(train.paths[i]);
  const auto uap_images = load_images(layout.root, uap_paths);

  adversarial::UniversalOptions uopts;
  uopts.xi = a.uap_xi;
  uopts.target_fool_rate = a.uap_target_fool_rate;
  uopts.max_epochs = a.uap_max_epochs;
  uopts.deepfool = {a.deepfool_max_iter, a.deepfool_overshoot};
  say(log, "gen-adversarial: fitting universal perturbation on " + std::to_string(uap_images.size()) + " images");
  const auto map = adversarial::universal_perturbation(net, uap_images, uopts, derive_stream(seed, 2).state());
  const double heldout_rate = adversarial::fooling_rate(net, test_images, map.values);
  say(log, "gen-adversarial: universal perturbation train rate " + format_double(map.fooling_rate) +
               ", held-out rate " + format_double(heldout_rate));

  // Recognizable adversarials: correctly classified test images + the map.
  std::vector<std::size_t> adv_src;
  for (std::size_t k = 0; k < correct_order.size() && adv_src.size() < static_cast<std::size_t>(a.adversarial_count); ++k) {
    adv_src.push_back(correct[correct_order[k]]);
  }
  std::sort(adv_src.begin(), adv_src.end());
  fs::create_directories(layout.root / "adversarial" / "uap");
  fs::create_directories(layout.root / "adversarial" / "fool");
  std::vector<std::string> adv_rows(adv_src.size());
  std::vector<char> adv_success(adv_src.size());
  parallel_for(adv_src.size(), [&](std::size_t j) {
    const std::size_t i = adv_src[j];
    const Image adv = detail::quantize(adversarial::apply_perturbation(test_images[i], map.values));
    adv_success[j] = classifier::forward(net, adv).argmax() != test_pred[i];
    RandomStream target_rng = derive_stream(seed, 100000 + i);
    const int target = adversarial::random_other_class(test.labels[i], net.class_count(), target_rng);
    const std::string rel = "adversarial/uap/" + stem_of(test.paths[i]) + ".pgm";
    save_image(adv, layout.root / rel);
    adv_rows[j] = rel + "," + test.paths[i] + ",uap," + std::to_string(target) + "," +
                  (adv_success[j] ? "1" : "0") + "\n";
  });
  const auto adv_successes = static_cast<std::size_t>(std::count(adv_success.begin(), adv_success.end(), 1));

  // DeepFool and FGSM on a probe of correctly classified test images.
  const std::size_t probe = std::min(correct_order.size(), static_cast<std::size_t>(a.deepfool_probe_images));
  std::vector<adversarial::AttackResult> df(probe), fg(probe);
  parallel_for(probe, [&](std::size_t k) {
    const std::size_t i = correct[correct_order[k]];
    df[k] = adversarial::deepfool(net, test_images[i], {a.deepfool_max_iter, a.deepfool_overshoot});
    fg[k] = adversarial::fgsm(net, test_images[i], test.labels[i], a.fgsm_epsilon);
  });
  RateCount df_rate, fg_rate;
  for (std::size_t k = 0; k < probe; ++k) {
    ++df_rate.attempts;
    df_rate.successes += df[k].success;
    df_rate.iterations += df[k].iterations;
    ++fg_rate.attempts;
    fg_rate.successes += fg[k].success;
    fg_rate.iterations += fg[k].iterations;
  }
  say(log, "gen-adversarial: deepfool " + std::to_string(df_rate.successes) + "/" + std::to_string(probe));

  // Unrecognizable fooling images from the training mean.
  const auto train_images = load_images(layout.root, train.paths);
  const Image mean = adversarial::mean_image(train_images);
  adversarial::FoolOptions fopts;
  fopts.alpha = a.fool_alpha;
  fopts.confidence_target = a.fool_confidence;
  fopts.max_iter = a.fool_max_iter;
  const auto n_fool = static_cast<std::size_t>(a.fooling_count);
  std::vector<adversarial::AttackResult> fool(n_fool);
  std::vector<int> fool_target(n_fool);
  std::vector<std::string> fool_rows(n_fool);
  parallel_for(n_fool, [&](std::size_t k) {
    RandomStream target_rng = derive_stream(seed, 200000 + k);
    fool_target[k] = static_cast<int>(target_rng.below(static_cast<std::uint64_t>(net.class_count())));
    fool[k] = adversarial::gradient_ascent_fool(net, fool_target[k], mean, fopts, derive_stream(seed, 300000 + k).state());
    char name[32];
    std::snprintf(name, sizeof(name), "fool_%05zu.pgm", k);
    const std::string rel = std::string("adversarial/fool/") + name;
    save_image(fool[k].adversarial, layout.root / rel);
    fool_rows[k] = rel + ",,gradient_ascent," + std::to_string(fool_target[k]) + "," +
                   (fool[k].success ? "1" : "0") + "\n";
  });
  RateCount fool_rate;
  for (const auto& r : fool) {
    ++fool_rate.attempts;
    fool_rate.successes += r.success;
    fool_rate.iterations += r.iterations;
  }
  say(log, "gen-adversarial: fooling " + std::to_string(fool_rate.successes) + "/" + std::to_string(n_fool));

  std::string csv = "path,source_path,method,target_class,success\n";
  for (const auto& r : adv_rows) csv += r;
  for (const auto& r : fool_rows) csv += r;
  write_text_file(layout.adversarial_manifest(), csv);
  adversarial::save_perturbation(map, layout.perturbation());
  detail::write_json(layout.attack_stats(),
                     {{"universal",
                       {{"xi", map.xi},
                        {"epochs", map.epochs},
                        {"train_images", uap_images.size()},
                        {"train_fooling_rate", map.fooling_rate},
                        {"heldout_images", test_images.size()},
                        {"heldout_fooling_rate", heldout_rate},
                        {"adversarials", adv_src.size()},
                        {"adversarial_successes", adv_successes}}},
                      {"deepfool", df_rate.to_json()},
                      {"fgsm", fg_rate.to_json()},
                      {"fooling", fool_rate.to_json()},
                      {"correctly_classified_test_images", correct.size()}});
}

void extract_features(const ExperimentConfig& c, const Layout& layout, const Logger& log) {
  (void)c;
  const auto ds = load_data(layout);
  const auto net = load_classifier(layout);
  const auto model = load_iqa(layout);
  detail::require_artifact(layout.distorted_manifest(), Stage::kGenDistortions);
  detail::require_artifact(layout.adversarial_manifest(), Stage::kGenAdversarial);
  const auto test = split_items(ds, datagen::Split::kTest);
  std::map<std::string, int> true_class_of;
  for (std::size_t i = 0; i < test.paths.size(); ++i) true_class_of[test.paths[i]] = test.labels[i];
  auto class_of = [&](const std::string& src) {
    const auto it = true_class_of.find(src);
    if (it == true_class_of.end()) fail(ErrorCode::kFormat, "unknown source image '" + src + "'");
    return it->second;
  };

  std::vector<detail::FeatureRow> rows;
  // Pristine test images; only correct ones join the original group.
  std::vector<detail::FeatureRow> pristine(test.paths.size());
  for (std::size_t i = 0; i < test.paths.size(); ++i) {
    pristine[i] = {test.paths[i], "original", test.labels[i], {}, detector::kFit, test.paths[i], -1, "", 0};
  }
  const auto dist = read_csv(layout.distorted_manifest());
  const std::size_t dp = dist.column("path"), ds_ = dist.column("source_path"), dk = dist.column("kind"),
                    dl = dist.column("level");
  for (const auto& r : dist.rows) {
    rows.push_back({r[dp], "distorted", class_of(r[ds_]), {}, detector::kUnfit, r[ds_], -1, r[dk], std::stoi(r[dl])});
  }
  const auto adv = read_csv(layout.adversarial_manifest());
  const std::size_t ap = adv.column("path"), as = adv.column("source_path"), am = adv.column("method");
  for (const auto& r : adv.rows) {
    if (r[am] == "gradient_ascent") {
      rows.push_back({r[ap], "fooling", -1, {}, detector::kUnfit, "", -1, "", 0});
    } else {
      rows.push_back({r[ap], "adversarial", class_of(r[as]), {}, detector::kUnfit, r[as], -1, "", 0});
    }
  }

  auto fill = [&](std::vector<detail::FeatureRow>& v) {
    parallel_for(v.size(), [&](std::size_t i) {
      const auto item = detector::make_eval_item(net, model, load_image(layout.root / v[i].image_id), v[i].true_class);
      v[i].feature = item.feature;
      v[i].predicted_class = item.predicted_class;
    });
  };
  say(log, "extract-features: " + std::to_string(pristine.size() + rows.size()) + " images");
  fill(pristine);
  fill(rows);

  std::string preds = "image_id,true_class,predicted_class,top1,mos\n";
  std::vector<detail::FeatureRow> all;
  for (const auto& p : pristine) {
    preds += p.image_id + "," + std::to_string(p.true_class) + "," + std::to_string(p.predicted_class) + "," +
             format_double(p.feature[0]) + "," + format_double(p.feature[5]) + "\n";
    if (p.predicted_class == p.true_class) all.push_back(p);
  }
  all.insert(all.end(), rows.begin(), rows.end());
  fs::create_directories(layout.features_csv().parent_path());
  write_text_file(layout.test_predictions_csv(), preds);
  detail::write_feature_rows(layout, all);
}

void train_detector(const ExperimentConfig& c, const Layout& layout, const Logger& log) {
  detail::require_artifact(layout.features_csv(), Stage::kExtractFeatures);
  const auto rows = detail::read_feature_rows(layout);
  const std::uint64_t seed = stage_seed(c.seed, Stage::kTrainDetector);

  std::map<std::string, std::size_t> original_index;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].group == "original") original_index[rows[i].image_id] = i;
  }
  std::vector<std::size_t> adv_rows, orig_rows;
  std::vector<std::string> adv_sources, orig_sources;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].group != "adversarial") continue;
    const auto it = original_index.find(rows[i].source_id);
    if (it == original_index.end()) {
      fail(ErrorCode::kUnpairedItems, "adversarial '" + rows[i].image_id + "' has no original in the feature table");
    }
    adv_rows.push_back(i);
    adv_sources.push_back(rows[i].source_id);
    orig_rows.push_back(it->second);
    orig_sources.push_back(rows[it->second].image_id);
  }
  const auto splits = detector::paired_split_protocol(adv_sources, orig_sources, c.detector.repetitions, seed);

  detector::SvmHyper hyper;
  hyper.C = c.detector.C;
  hyper.gamma = c.detector.gamma;
  hyper.tol = c.detector.tol;
  hyper.max_passes = c.detector.max_passes;

  std::vector<json> reps(splits.size());
  std::vector<detector::SvmModel> models(splits.size());
  parallel_for(splits.size(), [&](std::size_t r) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    json train_pairs = json::array(), test_pairs = json::array();
    for (const auto& p : splits[r].train) {
      const auto& o = rows[orig_rows[p.original]];
      const auto& ad = rows[adv_rows[p.adversarial]];
      x.emplace_back(o.feature.begin(), o.feature.end());
      y.push_back(detector::kFit);
      x.emplace_back(ad.feature.begin(), ad.feature.end());
      y.push_back(detector::kUnfit);
      train_pairs.push_back({o.image_id, ad.image_id});
    }
    for (const auto& p : splits[r].test) {
      test_pairs.push_back({rows[orig_rows[p.original]].image_id, rows[adv_rows[p.adversarial]].image_id});
    }
    const auto result = detector::train_svm(x, y, hyper, derive_stream(seed, 1000 + r).state());
    const auto kkt = detector::check_kkt(result.model, x, y, result.alphas, hyper.tol);
    models[r] = result.model;
    reps[r] = {{"repetition", r},
               {"train_pairs", train_pairs},
               {"test_pairs", test_pairs},
               {"training",
                {{"full_passes", result.full_passes},
                 {"converged", result.converged},
                 {"train_accuracy", result.train_accuracy},
                 {"support_vectors", result.model.support.size()},
                 {"kkt",
                  {{"violations", kkt.violations},
                   {"max_violation", kkt.max_violation},
                   {"dual_equality", kkt.dual_equality},
                   {"box_ok", kkt.box_ok}}}}}};
  });
  fs::create_directories(layout.detector_protocol().parent_path());
  for (std::size_t r = 0; r < models.size(); ++r) {
    detector::save_svm(models[r], layout.detector_model(static_cast<int>(r)));
    say(log, "train-detector: repetition " + std::to_string(r) + " train accuracy " +
                 format_double(reps[r]["training"]["train_accuracy"].get<double>()));
  }
  detail::write_json(layout.detector_protocol(), {{"pairs", adv_rows.size()},
                                                  {"repetitions", reps},
                                                  {"hyper",
                                                   {{"C", hyper.C},
                                                    {"gamma", hyper.gamma},
                                                    {"tol", hyper.tol},
                                                    {"max_passes", hyper.max_passes}}}});
}

}  // namespace

// -------------------------------------------------------------------------

std::span<const Stage> all_stages() { return kStages; }

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kGenData: return "gen-data";
    case Stage::kTrainClassifier: return "train-classifier";
    case Stage::kTrainIqa: return "train-iqa";
    case Stage::kGenDistortions: return "gen-distortions";
    case Stage::kGenAdversarial: return "gen-adversarial";
    case Stage::kExtractFeatures: return "extract-features";
    case Stage::kTrainDetector: return "train-detector";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kReport: return "report";
  }
  return "?";
}

Stage stage_from_name(std::string_view name) {
  for (Stage s : kStages) {
    if (stage_name(s) == name) return s;
  }
  fail(ErrorCode::kConfig, "unknown stage '" + std::string(name) + "'");
}

std::uint64_t stage_seed(std::uint64_t master, Stage stage) {
  if (stage == Stage::kGenData) return master;
  return derive_stream(master, 0x5EED00ULL + static_cast<std::uint64_t>(stage)).state();
}

fs::path Layout::detector_model(int repetition) const {
  char name[32];
  std::snprintf(name, sizeof(name), "svm_rep%02d.json", repetition);
  return root / "detector" / name;
}

void run_stage(Stage stage, const ExperimentConfig& config, const Logger& log) {
  const Layout layout{config.out};
  fs::create_directories(layout.root);
  const auto t0 = std::chrono::steady_clock::now();
  switch (stage) {
    case Stage::kGenData: gen_data(config, layout, log); break;
    case Stage::kTrainClassifier: train_classifier_stage(config, layout, log); break;
    case Stage::kTrainIqa: train_iqa_stage(config, layout, log); break;
    case Stage::kGenDistortions: gen_distortions(config, layout, log); break;
    case Stage::kGenAdversarial: gen_adversarial(config, layout, log); break;
    case Stage::kExtractFeatures: extract_features(config, layout, log); break;
    case Stage::kTrainDetector: train_detector(config, layout, log); break;
    case Stage::kEvaluate: run_evaluate(config, layout, log); break;
    case Stage::kReport: run_report(config, layout, log); break;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f s", secs);
  say(log, std::string(stage_name(stage)) + ": done in " + buf);
}

void run_all(const ExperimentConfig& config, const Logger& log) {
  for (Stage s : kStages) run_stage(s, config, log);
}

// -------------------------------------------------------------------------

namespace detail {

void require_artifact(const fs::path& path, Stage producer) {
  if (!fs::exists(path)) {
    fail(ErrorCode::kMissingPrerequisite, "missing prerequisite " + path.string() + "; run stage '" +
                                              std::string(stage_name(producer)) + "' first");
  }
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  write_text_file(path, j.dump(2) + "\n");
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, "cannot parse " + path.string() + ": " + e.what());
  }
}

Image quantize(const Image& image) { return decode_pgm(encode_pgm(image)); }

void write_feature_rows(const Layout& layout, const std::vector<FeatureRow>& rows) {
  std::string features = "image_id,group,true_class,p1,p2,p3,p4,p5,mos,label\n";
  std::string meta = "image_id,source_id,predicted_class,kind,level\n";
  for (const auto& r : rows) {
    features += r.image_id + "," + r.group + "," + std::to_string(r.true_class);
    for (double v : r.feature) features += "," + format_double(v);
    features += "," + std::to_string(r.label) + "\n";
    meta += r.image_id + "," + r.source_id + "," + std::to_string(r.predicted_class) + "," + r.kind + "," +
            (r.level > 0 ? std::to_string(r.level) : std::string()) + "\n";
  }
  fs::create_directories(layout.features_csv().parent_path());
  write_text_file(layout.features_csv(), features);
  write_text_file(layout.feature_meta_csv(), meta);
}

std::vector<FeatureRow> read_feature_rows(const Layout& layout) {
  require_artifact(layout.features_csv(), Stage::kExtractFeatures);
  require_artifact(layout.feature_meta_csv(), Stage::kExtractFeatures);
  const auto f = read_csv(layout.features_csv());
  const auto m = read_csv(layout.feature_meta_csv());
  if (f.rows.size() != m.rows.size()) fail(ErrorCode::kFormat, "feature table and metadata differ in length");
  const std::array<std::size_t, 6> cols{f.column("p1"), f.column("p2"), f.column("p3"),
                                        f.column("p4"), f.column("p5"), f.column("mos")};
  const std::size_t fid = f.column("image_id"), fg = f.column("group"), ft = f.column("true_class"),
                    fl = f.column("label");
  const std::size_t mid = m.column("image_id"), ms = m.column("source_id"), mp = m.column("predicted_class"),
                    mk = m.column("kind"), ml = m.column("level");
  std::vector<FeatureRow> rows(f.rows.size());
  try {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& fr = f.rows[i];
      const auto& mr = m.rows[i];
      if (fr[fid] != mr[mid]) fail(ErrorCode::kFormat, "feature metadata out of order at row " + std::to_string(i));
      FeatureRow& r = rows[i];
      r.image_id = fr[fid];
      r.group = fr[fg];
      r.true_class = std::stoi(fr[ft]);
      for (std::size_t k = 0; k < cols.size(); ++k) r.feature[k] = parse_double(fr[cols[k]]);
      r.label = std::stoi(fr[fl]);
      r.source_id = mr[ms];
      r.predicted_class = std::stoi(mr[mp]);
      r.kind = mr[mk];
      r.level = mr[ml].empty() ? 0 : std::stoi(mr[ml]);
    }
  } catch (const std::logic_error& e) {
    fail(ErrorCode::kFormat, std::string("malformed feature table: ") + e.what());
  }
  return rows;
}

}  // namespace detail

}  // namespace fitgate::pipeline
