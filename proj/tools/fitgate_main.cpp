#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fitgate/core/error.hpp"
#include "fitgate/core/text.hpp"
#include "fitgate/pipeline/config.hpp"
#include "fitgate/pipeline/stages.hpp"

namespace {

using nlohmann::json;
using namespace fitgate;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPrerequisite = 3;

void collect_leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      collect_leaves(it.value(), key, out);
    } else {
      out.push_back(key);
    }
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDomain:
      return kExitValidation;
    case ErrorCode::kMissingPrerequisite:
      return kExitPrerequisite;
    default:
      return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fitgate: fit-for-task gating experiments on synthetic shapes"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> sets;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON config file; unspecified keys keep their defaults");
  app.add_option("--seed", seed, "Master seed (same as --set seed=N)");
  app.add_option("--out", out_dir, "Output directory (same as --set out=DIR)");
  app.add_option("--set", sets, "Override a config key by dotted path, e.g. --set iqa.epochs=5")
      ->type_name("KEY=VALUE");
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  // Every config key is also a flag of the same dotted name.
  std::vector<std::string> leaves;
  collect_leaves(pipeline::default_config_json(), "", leaves);
  leaves.erase(std::remove_if(leaves.begin(), leaves.end(),
                              [](const std::string& k) { return k == "seed" || k == "out"; }),
               leaves.end());
  std::map<std::string, std::string> leaf_values;
  std::map<std::string, CLI::Option*> leaf_options;
  for (const auto& key : leaves) {
    leaf_options[key] = app.add_option("--" + key, leaf_values[key], "Config key " + key)
                            ->group("Config keys")
                            ->type_name("VALUE");
  }

  std::vector<std::string> stage_names;
  for (auto s : pipeline::all_stages()) stage_names.emplace_back(pipeline::stage_name(s));
  for (const auto& name : stage_names) app.add_subcommand(name, "Run the " + name + " stage");
  app.add_subcommand("all", "Run every stage in order");
  app.add_subcommand("print-config", "Print the fully resolved config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    json cfg = pipeline::default_config_json();
    if (!config_path.empty()) {
      json file;
      try {
        file = json::parse(read_text_file(config_path));
      } catch (const json::exception& e) {
        fail(ErrorCode::kConfig, "cannot parse config " + config_path + ": " + e.what());
      }
      cfg = pipeline::merge_config(cfg, file);
    }
    for (const auto& key : leaves) {
      if (leaf_options[key]->count() > 0) pipeline::apply_override(cfg, key + "=" + leaf_values[key]);
    }
    for (const auto& s : sets) pipeline::apply_override(cfg, s);
    if (seed) cfg["seed"] = *seed;
    if (!out_dir.empty()) cfg["out"] = out_dir;
    const auto config = pipeline::parse_config(cfg);

    const CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "print-config") {
      std::cout << pipeline::to_json(config).dump(2) << "\n";
      return kExitOk;
    }
    pipeline::Logger log;
    if (!quiet) log = [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); };
    if (sub->get_name() == "all") {
      pipeline::run_all(config, log);
    } else {
      pipeline::run_stage(pipeline::stage_from_name(sub->get_name()), config, log);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(error_code_name(e.code())).c_str(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitOk;
}
