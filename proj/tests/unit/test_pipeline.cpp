#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "fitgate/core/error.hpp"
#include "fitgate/core/text.hpp"
#include "fitgate/pipeline/config.hpp"
#include "fitgate/pipeline/stages.hpp"

using namespace fitgate;
using namespace fitgate::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

// A configuration small enough to run every stage in a few seconds.
json tiny_config(const fs::path& out) {
  json j = default_config_json();
  j["out"] = out.string();
  j["seed"] = 7;
  j["data"] = {{"train_per_class", 12}, {"test_per_class", 5}, {"image_size", 32}};
  j["classifier"]["epochs"] = 3;
  j["distortion"]["subset"] = 6;
  j["iqa"]["source_images"] = 12;
  j["iqa"]["epochs"] = 3;
  j["attack"]["deepfool_probe_images"] = 8;
  j["attack"]["uap_max_epochs"] = 1;
  j["attack"]["uap_train_images"] = 100;
  j["attack"]["adversarial_count"] = 12;
  j["attack"]["fooling_count"] = 4;
  j["attack"]["fool_max_iter"] = 40;
  j["detector"]["repetitions"] = 2;
  return j;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fitgate_test_" + name);
  fs::remove_all(p);
  return p;
}

struct Shell {
  int rc = -1;
  std::string out;
};

Shell run_cli(const std::string& args) {
  Shell s;
  const std::string cmd = std::string(FITGATE_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) s.out.append(buf.data(), n);
  const int status = pclose(pipe);
  s.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return s;
}

}  // namespace

TEST_CASE("default config parses and round trips") {
  const ExperimentConfig c = parse_config(default_config_json());
  CHECK(c.seed == 42);
  CHECK(c.data.train_per_class == 500);
  CHECK(c.detector.C == 10.0);
  CHECK(c.detector.gamma == doctest::Approx(1.0 / 6));
  CHECK(c.detector.tau == 0.3);
  CHECK(c.attack.uap_xi == 0.1);
  CHECK(to_json(c) == default_config_json());
}

TEST_CASE("overrides by dotted path") {
  json j = default_config_json();
  apply_override(j, "detector.tau=0.45");
  apply_override(j, "iqa.hidden=[32,16]");
  apply_override(j, "out=some/dir");
  const ExperimentConfig c = parse_config(j);
  CHECK(c.detector.tau == 0.45);
  CHECK(c.iqa.hidden == std::vector<int>{32, 16});
  CHECK(c.out == fs::path("some/dir"));

  CHECK(code_of([&] { apply_override(j, "detector.nope=1"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { apply_override(j, "detector.tau"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { apply_override(j, "detector=3"); }) == ErrorCode::kConfig);
}

TEST_CASE("merge rejects unknown keys and type mismatches") {
  const json base = default_config_json();
  CHECK(merge_config(base, json{{"seed", 9}})["seed"] == 9);
  CHECK(code_of([&] { merge_config(base, json{{"bogus", 1}}); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { merge_config(base, json{{"data", 5}}); }) == ErrorCode::kConfig);
}

TEST_CASE("validation enforces operation preconditions") {
  auto bad = [](const std::string& assignment) {
    json j = default_config_json();
    apply_override(j, assignment);
    return code_of([&] { parse_config(j); }) == ErrorCode::kConfig;
  };
  CHECK(bad("detector.tau=1.5"));
  CHECK(bad("detector.C=0"));
  CHECK(bad("attack.uap_train_images=50"));
  CHECK(bad("attack.fgsm_epsilon=-0.1"));
  CHECK(bad("data.image_size=16"));
  CHECK(bad("distortion.blur_sigma=[2,1,3,4,5]"));
  CHECK(bad("classifier.momentum=1.0"));
  CHECK(bad("detector.repetitions=0"));
  CHECK(bad("iqa.patch_size=16"));
}

TEST_CASE("config files overlay the defaults") {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  write_text_file(dir / "c.json", R"({"seed": 5, "detector": {"repetitions": 3}})");
  const ExperimentConfig c = load_config_file(dir / "c.json");
  CHECK(c.seed == 5);
  CHECK(c.detector.repetitions == 3);
  CHECK(c.data.test_per_class == 100);
  write_text_file(dir / "bad.json", "{not json");
  CHECK(code_of([&] { load_config_file(dir / "bad.json"); }) == ErrorCode::kConfig);
  fs::remove_all(dir);
}

TEST_CASE("stage names and seeds") {
  const std::vector<std::string> expect{"gen-data",        "train-classifier", "train-iqa",
                                        "gen-distortions", "gen-adversarial",  "extract-features",
                                        "train-detector",  "evaluate",         "report"};
  REQUIRE(all_stages().size() == expect.size());
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(stage_name(all_stages()[i]) == expect[i]);
    CHECK(stage_from_name(expect[i]) == all_stages()[i]);
    seeds.insert(stage_seed(42, all_stages()[i]));
  }
  CHECK(seeds.size() == expect.size());
  CHECK(stage_seed(42, Stage::kGenData) == 42);
  CHECK(code_of([] { stage_from_name("train"); }) == ErrorCode::kConfig);
}

TEST_CASE("stages name their missing prerequisite") {
  const fs::path out = scratch("missing");
  const ExperimentConfig c = parse_config(tiny_config(out));
  try {
    run_stage(Stage::kEvaluate, c);
    FAIL("expected missing prerequisite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingPrerequisite);
    CHECK(std::string(e.what()).find("train-detector") != std::string::npos);
  }
  CHECK(code_of([&] { run_stage(Stage::kTrainClassifier, c); }) == ErrorCode::kMissingPrerequisite);
  CHECK(code_of([&] { run_stage(Stage::kReport, c); }) == ErrorCode::kMissingPrerequisite);
  fs::remove_all(out);
}

TEST_CASE("a miniature pipeline runs end to end and is reproducible") {
  const fs::path out = scratch("e2e");
  const ExperimentConfig c = parse_config(tiny_config(out));
  std::vector<std::string> log;
  run_all(c, [&](const std::string& m) { log.push_back(m); });
  CHECK_FALSE(log.empty());

  const Layout layout{out};
  for (const fs::path& p :
       {layout.data_manifest(), layout.classifier_model(), layout.iqa_model(), layout.distorted_manifest(),
        layout.adversarial_manifest(), layout.perturbation(), layout.attack_stats(), layout.features_csv(),
        layout.feature_meta_csv(), layout.detector_protocol(), layout.detector_model(0), layout.detector_model(1),
        layout.evaluation(), layout.report_json(), layout.tables_csv(), layout.semantic_csv()}) {
    CHECK_MESSAGE(fs::exists(p), p.string());
  }

  // 4 kinds x 5 levels x 6 sources.
  CHECK(read_csv(layout.distorted_manifest()).rows.size() == 120);
  const auto features = read_csv(layout.features_csv());
  CHECK(features.header == std::vector<std::string>{"image_id", "group", "true_class", "p1", "p2", "p3", "p4",
                                                     "p5", "mos", "label"});
  for (const auto& row : features.rows) {
    const double p1 = std::stod(row[3]), p5 = std::stod(row[7]), mos = std::stod(row[8]);
    CHECK(p1 >= p5);
    CHECK(mos >= 0.0);
    CHECK(mos <= 1.0);
    CHECK((row[9] == "1" || row[9] == "-1"));
  }

  const json report = json::parse(read_text_file(layout.report_json()));
  for (const char* key : {"config", "classifier", "iqa", "attacks", "distortion_table", "quality_stats",
                          "confidence_stats", "baselines", "detector", "evaluation"}) {
    CHECK_MESSAGE(report.contains(key), key);
  }
  CHECK(report["distortion_table"].size() == 20);
  CHECK(report["evaluation"]["repetitions"] == 2);
  for (const auto& rep : report["detector_training"]) CHECK(rep["kkt"]["violations"] == 0);

  // Same config, fresh directory contents: byte-identical report.
  const std::string first = read_text_file(layout.report_json());
  fs::remove_all(out);
  run_all(c);
  CHECK(read_text_file(layout.report_json()) == first);

  // Re-running a single stage over existing artifacts is idempotent.
  run_stage(Stage::kReport, c);
  CHECK(read_text_file(layout.report_json()) == first);
  fs::remove_all(out);
}

TEST_CASE("cli exit codes and config echo") {
  const Shell ok = run_cli("print-config --set detector.tau=0.4 --seed 11 --attack.uap_xi 0.05");
  CHECK(ok.rc == 0);
  const json printed = json::parse(ok.out);
  CHECK(printed["detector"]["tau"] == 0.4);
  CHECK(printed["seed"] == 11);
  CHECK(printed["attack"]["uap_xi"] == 0.05);

  CHECK(run_cli("print-config --set detector.nope=1").rc == 2);
  CHECK(run_cli("print-config --set detector.tau=7").rc == 2);
  CHECK(run_cli("print-config --no-such-flag").rc == 2);
  CHECK(run_cli("").rc == 2);

  const fs::path out = scratch("cli");
  CHECK(run_cli("evaluate -q --out " + out.string()).rc == 3);
  CHECK(run_cli("--help").rc == 0);
  fs::remove_all(out);
}
