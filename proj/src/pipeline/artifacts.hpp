#pragma once

// Shared artifact helpers for the stage implementations.

#include <filesystem>
#include <string>
#include <vector>

#include "fitgate/core/image.hpp"
#include "fitgate/detector/detector.hpp"
#include "fitgate/pipeline/stages.hpp"
#include "json.hpp"

namespace fitgate::pipeline::detail {

// Throws kMissingPrerequisite naming `producer` when `path` is absent.
void require_artifact(const std::filesystem::path& path, Stage producer);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Round trip through 8-bit PGM so in-memory results match what later stages
// read back from disk.
Image quantize(const Image& image);

struct FeatureRow {
  std::string image_id;
  std::string group;  // original | distorted | adversarial | fooling
  int true_class = -1;
  detector::FitFeature feature{};
  int label = 0;
  std::string source_id;  // empty for fooling images
  int predicted_class = -1;
  std::string kind;  // distorted only
  int level = 0;     // distorted only
};

void write_feature_rows(const Layout& layout, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_feature_rows(const Layout& layout);

inline constexpr const char* kGroups[] = {"original", "distorted", "adversarial", "fooling"};

}  // namespace fitgate::pipeline::detail
