#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace fitgate {

// Row-major 2-D grid of doubles with no range constraint (gradients, MSCN
// coefficients, perturbation maps, ...).
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, double fill = 0.0);
  Grid(int width, int height, std::vector<double> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator()(int x, int y) const noexcept {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  double& operator()(int x, int y) noexcept {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }
  double* data() noexcept { return values_.data(); }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// Grayscale image: a Grid whose intensities all lie in [0, 1].
class Image {
 public:
  Image() = default;
  // Throws kDomain if any value is outside [0,1] or not finite.
  explicit Image(Grid grid);
  Image(int width, int height, std::vector<double> values);

  static Image filled(int width, int height, double value);
  // Clamps every value into [0,1]; NaN maps to 0.
  static Image clamped(Grid grid);

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  std::size_t size() const noexcept { return grid_.size(); }
  double operator()(int x, int y) const noexcept { return grid_(x, y); }
  std::span<const double> values() const noexcept { return grid_.values(); }
  const double* data() const noexcept { return grid_.data(); }
  const Grid& grid() const noexcept { return grid_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  struct Unchecked {};
  Image(Grid grid, Unchecked) : grid_(std::move(grid)) {}

  Grid grid_;
};

// Binary PGM (P5, maxval 255). Load maps byte b to b/255; save maps e to
// round(e*255) clamped to [0,255].
Image load_image(const std::filesystem::path& path);
Image decode_pgm(std::span<const unsigned char> bytes);
void save_image(const Image& image, const std::filesystem::path& path);
std::vector<unsigned char> encode_pgm(const Image& image);

// Mirror index into [0, n) without repeating the edge sample (dcb|abcd|cba).
int reflect_index(int i, int n) noexcept;

}  // namespace fitgate
