#include "fitgate/datagen/shapes.hpp"

#include <cmath>
#include <cstdio>
#include <span>
#include <numbers>

#include "fitgate/core/error.hpp"
#include "fitgate/core/text.hpp"

namespace fitgate::datagen {

namespace {

constexpr double kPi = std::numbers::pi;

struct Local {
  double x;
  double y;
};

// Point relative to the shape centre, expressed in the shape's own frame.
Local to_local(const ShapeParams& p, int size, double x, double y) {
  const double cx = 0.5 * size + p.offset_x;
  const double cy = 0.5 * size + p.offset_y;
  const double dx = x - cx;
  const double dy = y - cy;
  const double c = std::cos(p.rotation);
  const double s = std::sin(p.rotation);
  return {c * dx + s * dy, -s * dx + c * dy};
}

// Even-odd crossing test against a polygon given by its vertex radii and a
// starting angle; vertices are evenly spaced in angle.
bool in_radial_polygon(Local q, std::span<const double> radii, double start_angle) {
  const std::size_t n = radii.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double ai = start_angle + 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    const double aj = start_angle + 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
    const double xi = radii[i] * std::cos(ai), yi = radii[i] * std::sin(ai);
    const double xj = radii[j] * std::cos(aj), yj = radii[j] * std::sin(aj);
    if ((yi > q.y) != (yj > q.y)) {
      const double x_cross = (xj - xi) * (q.y - yi) / (yj - yi) + xi;
      if (q.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool in_regular_polygon(Local q, int sides, double radius, double start_angle) {
  std::vector<double> radii(static_cast<std::size_t>(sides), radius);
  return in_radial_polygon(q, radii, start_angle);
}

void check_class(int id) {
  if (id < 0 || id >= kClassCount) {
    fail(ErrorCode::kInvalidArgument, "unknown shape class id " + std::to_string(id));
  }
}

}  // namespace

std::string_view class_name(int id) {
  check_class(id);
  return kClassNames[static_cast<std::size_t>(id)];
}

int class_id(std::string_view name) {
  for (int i = 0; i < kClassCount; ++i) {
    if (kClassNames[static_cast<std::size_t>(i)] == name) return i;
  }
  fail(ErrorCode::kInvalidArgument, "unknown shape class '" + std::string(name) + "'");
}

std::vector<std::string> class_name_list() {
  return {kClassNames.begin(), kClassNames.end()};
}

bool shape_contains(int id, const ShapeParams& p, int size, double x, double y) {
  check_class(id);
  const Local q = to_local(p, size, x, y);
  const double r = p.radius;
  const double dist = std::hypot(q.x, q.y);
  switch (id) {
    case 0:  // triangle
      return in_regular_polygon(q, 3, r, -kPi / 2);
    case 1:  // square, axis-aligned at zero rotation
      return in_regular_polygon(q, 4, r, kPi / 4);
    case 2:  // pentagon
      return in_regular_polygon(q, 5, r, -kPi / 2);
    case 3:  // hexagon
      return in_regular_polygon(q, 6, r, -kPi / 2);
    case 4: {  // five-point star
      std::array<double, 10> radii{};
      for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = (i % 2 == 0) ? r : 0.4 * r;
      return in_radial_polygon(q, radii, -kPi / 2);
    }
    case 5:  // circle
      return dist <= r;
    case 6: {  // ellipse
      const double a = q.x / r;
      const double b = q.y / (0.55 * r);
      return a * a + b * b <= 1.0;
    }
    case 7:  // annulus
      return dist <= r && dist >= 0.5 * r;
    case 8:  // crescent: disc minus a disc shifted along +x
      return dist <= r && std::hypot(q.x - 0.5 * r, q.y) > 0.85 * r;
    case 9:  // checkerboard extent: square bounding the circle of radius r
      return std::abs(q.x) <= r && std::abs(q.y) <= r;
  }
  return false;
}

bool checker_is_foreground(const ShapeParams& p, int size, double x, double y) {
  const Local q = to_local(p, size, x, y);
  const double tile = 2.0 * p.radius / 8.0;
  const auto i = static_cast<long>(std::floor((q.x + p.radius) / tile));
  const auto j = static_cast<long>(std::floor((q.y + p.radius) / tile));
  return ((i + j) % 2 + 2) % 2 == 0;
}

ShapeParams sample_params(RandomStream& rng, int size) {
  ShapeParams p;
  p.foreground = rng.uniform(0.6, 0.95);
  p.background = rng.uniform(0.05, 0.4);
  p.offset_x = rng.uniform(-0.15, 0.15) * size;
  p.offset_y = rng.uniform(-0.15, 0.15) * size;
  p.radius = rng.uniform(0.25, 0.40) * size;
  p.rotation = rng.uniform(0.0, 2.0 * kPi);
  return p;
}

Image render_with(int id, const ShapeParams& p, int size, RandomStream& rng) {
  check_class(id);
  Grid grid(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      double value = p.background;
      if (shape_contains(id, p, size, px, py)) {
        value = (id == 9 && !checker_is_foreground(p, size, px, py)) ? p.background : p.foreground;
      }
      grid(x, y) = value + rng.uniform(-p.noise_amplitude, p.noise_amplitude);
    }
  }
  return Image::clamped(std::move(grid));
}

Image render_shape(int id, RandomStream rng, int size) {
  check_class(id);
  if (size < 32) fail(ErrorCode::kInvalidArgument, "render_shape: size must be >= 32");
  const ShapeParams p = sample_params(rng, size);
  return render_with(id, p, size, rng);
}

std::string_view split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

std::vector<DatasetItem> Dataset::split_items(Split split) const {
  std::vector<DatasetItem> out;
  for (const auto& item : items) {
    if (item.split == split) out.push_back(item);
  }
  return out;
}

Dataset generate_dataset(int n_train_per_class, int n_test_per_class, std::uint64_t seed,
                         const std::filesystem::path& out_dir, int size) {
  if (n_train_per_class < 1 || n_test_per_class < 1) {
    fail(ErrorCode::kInvalidArgument, "generate_dataset: per-class counts must be >= 1");
  }
  std::error_code ec;
  for (Split split : {Split::kTrain, Split::kTest}) {
    std::filesystem::create_directories(out_dir / std::string(split_name(split)), ec);
    if (ec) fail(ErrorCode::kIo, "cannot create " + (out_dir / std::string(split_name(split))).string());
  }

  Dataset ds;
  ds.root = out_dir;
  ds.manifest_path = out_dir / "manifest.csv";
  std::string manifest = "path,class_id,split\n";
  std::uint64_t index = 0;
  for (Split split : {Split::kTrain, Split::kTest}) {
    const int per_class = split == Split::kTrain ? n_train_per_class : n_test_per_class;
    for (int c = 0; c < kClassCount; ++c) {
      for (int k = 0; k < per_class; ++k, ++index) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%05d.pgm", kClassNames[static_cast<std::size_t>(c)].data(), k);
        DatasetItem item{std::string(split_name(split)) + "/" + name, c, split};
        save_image(render_shape(c, derive_stream(seed, index), size), ds.absolute(item));
        manifest += item.path + "," + std::to_string(c) + "," + std::string(split_name(split)) + "\n";
        ds.items.push_back(std::move(item));
      }
    }
  }
  write_text_file(ds.manifest_path, manifest);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const CsvTable table = read_csv(manifest_path);
  const std::size_t c_path = table.column("path");
  const std::size_t c_class = table.column("class_id");
  const std::size_t c_split = table.column("split");
  Dataset ds;
  ds.root = manifest_path.parent_path();
  ds.manifest_path = manifest_path;
  for (const auto& row : table.rows) {
    DatasetItem item;
    item.path = row[c_path];
    item.class_id = std::stoi(row[c_class]);
    check_class(item.class_id);
    if (row[c_split] == "train") {
      item.split = Split::kTrain;
    } else if (row[c_split] == "test") {
      item.split = Split::kTest;
    } else {
      fail(ErrorCode::kFormat, "manifest: unknown split '" + row[c_split] + "'");
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

std::string builtin_taxonomy() {
  return "# shape class taxonomy (root depth 1, leaves depth 3)\n"
         "shape\n"
         "shape polygon\n"
         "shape curved\n"
         "shape grid\n"
         "polygon triangle\n"
         "polygon square\n"
         "polygon pentagon\n"
         "polygon hexagon\n"
         "polygon star\n"
         "curved circle\n"
         "curved ellipse\n"
         "curved annulus\n"
         "curved crescent\n"
         "grid checkerboard\n";
}

}  // namespace fitgate::datagen
