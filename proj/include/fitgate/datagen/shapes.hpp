#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fitgate/core/image.hpp"
#include "fitgate/core/random.hpp"

namespace fitgate::datagen {

inline constexpr int kClassCount = 10;

inline constexpr std::array<std::string_view, kClassCount> kClassNames = {
    "triangle", "square", "pentagon", "hexagon", "star",
    "circle",   "ellipse", "annulus", "crescent", "checkerboard"};

std::string_view class_name(int class_id);
// Throws kInvalidArgument for unknown names.
int class_id(std::string_view name);
std::vector<std::string> class_name_list();

// Geometry and intensities of one rendered shape. Offsets are in pixels from
// the image centre; radius in pixels; rotation in radians.
struct ShapeParams {
  double foreground = 0.8;
  double background = 0.2;
  double offset_x = 0.0;
  double offset_y = 0.0;
  double radius = 20.0;
  double rotation = 0.0;
  double noise_amplitude = 0.05;
};

// Whether the point (x, y) in pixel coordinates lies inside the shape body.
// For the checkerboard this reports the board extent; tile colour comes from
// checker_is_foreground().
bool shape_contains(int class_id, const ShapeParams& params, int size, double x, double y);
bool checker_is_foreground(const ShapeParams& params, int size, double x, double y);

// Draws ShapeParams in a fixed order: foreground, background, offset x,
// offset y, radius, rotation.
ShapeParams sample_params(RandomStream& rng, int size);

// Renders with explicit parameters; per-pixel texture noise is drawn from rng
// in row-major order.
Image render_with(int class_id, const ShapeParams& params, int size, RandomStream& rng);

// size >= 32. Throws kInvalidArgument for unknown class ids or small sizes.
Image render_shape(int class_id, RandomStream rng, int size = 64);

enum class Split { kTrain, kTest };
std::string_view split_name(Split split);

struct DatasetItem {
  std::string path;  // relative to the dataset root
  int class_id = 0;
  Split split = Split::kTrain;
};

struct Dataset {
  std::filesystem::path root;
  std::filesystem::path manifest_path;
  std::vector<DatasetItem> items;

  std::filesystem::path absolute(const DatasetItem& item) const { return root / item.path; }
  std::vector<DatasetItem> split_items(Split split) const;
};

// Writes PGMs under out_dir/{train,test}/ and out_dir/manifest.csv with header
// "path,class_id,split". Item i (train items first, class-major) is rendered
// from derive_stream(seed, i).
Dataset generate_dataset(int n_train_per_class, int n_test_per_class, std::uint64_t seed,
                         const std::filesystem::path& out_dir, int size = 64);

Dataset load_dataset(const std::filesystem::path& manifest_path);

// The fixed shape taxonomy in the semantics text format.
std::string builtin_taxonomy();

}  // namespace fitgate::datagen
