#include "fitgate/distortion/distort.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "fitgate/core/error.hpp"

namespace fitgate::distortion {

namespace {

void check_level(int level) {
  if (level < 1 || level > kLevels) {
    fail(ErrorCode::kInvalidArgument, "distortion level must be in 1..5, got " + std::to_string(level));
  }
}

// Reflect-101 pad up to the next multiple of `block` in each dimension.
Grid pad_to_multiple(const Grid& g, int block) {
  const int w = (g.width() + block - 1) / block * block;
  const int h = (g.height() + block - 1) / block * block;
  if (w == g.width() && h == g.height()) return g;
  Grid out(w, h);
  for (int y = 0; y < h; ++y) {
    const int sy = reflect_index(y, g.height());
    for (int x = 0; x < w; ++x) out(x, y) = g(reflect_index(x, g.width()), sy);
  }
  return out;
}

Image crop_clamped(const Grid& g, int width, int height) {
  Grid out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out(x, y) = g(x, y);
  }
  return Image::clamped(std::move(out));
}

// c[u][x] = alpha(u) cos((2x+1) u pi / 16)
const std::array<double, 64>& dct_basis() {
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> b{};
    for (int u = 0; u < 8; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) {
        b[static_cast<std::size_t>(u * 8 + x)] = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
    return b;
  }();
  return basis;
}

// out = M * in * M^T (forward) or M^T * in * M (inverse).
void separable_8x8(double* block, bool inverse) {
  const auto& m = dct_basis();
  double tmp[64];
  for (int r = 0; r < 8; ++r) {
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) {
        const double coeff = inverse ? m[static_cast<std::size_t>(x * 8 + u)] : m[static_cast<std::size_t>(u * 8 + x)];
        s += coeff * block[r * 8 + x];
      }
      tmp[r * 8 + u] = s;
    }
  }
  for (int c = 0; c < 8; ++c) {
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) {
        const double coeff = inverse ? m[static_cast<std::size_t>(y * 8 + v)] : m[static_cast<std::size_t>(v * 8 + y)];
        s += coeff * tmp[y * 8 + c];
      }
      block[v * 8 + c] = s;
    }
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;

}  // namespace

const std::array<int, 64> kJpegLuminanceTable{
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::kBlur: return "blur";
    case Kind::kAwgn: return "awgn";
    case Kind::kJpegLike: return "jpeg_like";
    case Kind::kJp2kLike: return "jp2k_like";
  }
  return "?";
}

Kind kind_from_name(std::string_view name) {
  for (Kind k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown distortion kind '" + std::string(name) + "'");
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorCode::kInvalidArgument, "blur sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& image, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = image.width();
  const int h = image.height();
  Grid tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -radius; t <= radius; ++t) s += k[static_cast<std::size_t>(t + radius)] * image(reflect_index(x + t, w), y);
      tmp(x, y) = s;
    }
  }
  Grid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -radius; t <= radius; ++t) s += k[static_cast<std::size_t>(t + radius)] * tmp(x, reflect_index(y + t, h));
      out(x, y) = s;
    }
  }
  return Image::clamped(std::move(out));
}

Image add_white_noise(const Image& image, double sigma, RandomStream& rng) {
  if (!(sigma >= 0.0)) fail(ErrorCode::kInvalidArgument, "noise sigma must be non-negative");
  Grid out = image.grid();
  for (double& v : out.values()) v += sigma * rng.normal();
  return Image::clamped(std::move(out));
}

void dct8x8(double* block) { separable_8x8(block, false); }
void idct8x8(double* block) { separable_8x8(block, true); }

Image jpeg_like(const Image& image, double multiplier) {
  if (!(multiplier > 0.0)) fail(ErrorCode::kInvalidArgument, "jpeg multiplier must be positive");
  Grid g = pad_to_multiple(image.grid(), 8);
  double block[64];
  for (int by = 0; by < g.height(); by += 8) {
    for (int bx = 0; bx < g.width(); bx += 8) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) block[y * 8 + x] = 255.0 * g(bx + x, by + y) - 128.0;
      }
      dct8x8(block);
      for (std::size_t i = 0; i < 64; ++i) {
        const double q = kJpegLuminanceTable[i] * multiplier;
        block[i] = std::round(block[i] / q) * q;
      }
      idct8x8(block);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) g(bx + x, by + y) = (block[y * 8 + x] + 128.0) / 255.0;
      }
    }
  }
  return crop_clamped(g, image.width(), image.height());
}

void haar_forward(std::vector<double>& data, int width, int height, int levels) {
  std::vector<double> line;
  int w = width;
  int h = height;
  for (int l = 0; l < levels; ++l) {
    if (w % 2 != 0 || h % 2 != 0) fail(ErrorCode::kInvalidArgument, "haar: band size must be even");
    line.resize(static_cast<std::size_t>(std::max(w, h)));
    for (int y = 0; y < h; ++y) {
      double* row = data.data() + static_cast<std::size_t>(y) * width;
      for (int i = 0; i < w / 2; ++i) {
        line[static_cast<std::size_t>(i)] = (row[2 * i] + row[2 * i + 1]) * kInvSqrt2;
        line[static_cast<std::size_t>(w / 2 + i)] = (row[2 * i] - row[2 * i + 1]) * kInvSqrt2;
      }
      std::copy_n(line.begin(), w, row);
    }
    for (int x = 0; x < w; ++x) {
      auto at = [&](int y) -> double& { return data[static_cast<std::size_t>(y) * width + x]; };
      for (int i = 0; i < h / 2; ++i) {
        line[static_cast<std::size_t>(i)] = (at(2 * i) + at(2 * i + 1)) * kInvSqrt2;
        line[static_cast<std::size_t>(h / 2 + i)] = (at(2 * i) - at(2 * i + 1)) * kInvSqrt2;
      }
      for (int y = 0; y < h; ++y) at(y) = line[static_cast<std::size_t>(y)];
    }
    w /= 2;
    h /= 2;
  }
}

void haar_inverse(std::vector<double>& data, int width, int height, int levels) {
  std::vector<double> line;
  for (int l = levels - 1; l >= 0; --l) {
    const int w = width >> l;
    const int h = height >> l;
    line.resize(static_cast<std::size_t>(std::max(w, h)));
    for (int x = 0; x < w; ++x) {
      auto at = [&](int y) -> double& { return data[static_cast<std::size_t>(y) * width + x]; };
      for (int i = 0; i < h / 2; ++i) {
        const double s = at(i);
        const double d = at(h / 2 + i);
        line[static_cast<std::size_t>(2 * i)] = (s + d) * kInvSqrt2;
        line[static_cast<std::size_t>(2 * i + 1)] = (s - d) * kInvSqrt2;
      }
      for (int y = 0; y < h; ++y) at(y) = line[static_cast<std::size_t>(y)];
    }
    for (int y = 0; y < h; ++y) {
      double* row = data.data() + static_cast<std::size_t>(y) * width;
      for (int i = 0; i < w / 2; ++i) {
        const double s = row[i];
        const double d = row[w / 2 + i];
        line[static_cast<std::size_t>(2 * i)] = (s + d) * kInvSqrt2;
        line[static_cast<std::size_t>(2 * i + 1)] = (s - d) * kInvSqrt2;
      }
      std::copy_n(line.begin(), w, row);
    }
  }
}

Image jp2k_like(const Image& image, double keep_fraction) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    fail(ErrorCode::kInvalidArgument, "jp2k keep fraction must be in (0,1]");
  }
  constexpr int kHaarLevels = 3;
  Grid g = pad_to_multiple(image.grid(), 1 << kHaarLevels);
  std::vector<double> coeffs(g.values().begin(), g.values().end());
  haar_forward(coeffs, g.width(), g.height(), kHaarLevels);

  const std::size_t n = coeffs.size();
  const auto keep = std::min(n, static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n))));
  if (keep < n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Larger magnitude first; equal magnitudes keep the lower index.
    auto before = [&](std::size_t a, std::size_t b) {
      const double ma = std::abs(coeffs[a]);
      const double mb = std::abs(coeffs[b]);
      return ma != mb ? ma > mb : a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), before);
    for (std::size_t i = keep; i < n; ++i) coeffs[order[i]] = 0.0;
  }
  haar_inverse(coeffs, g.width(), g.height(), kHaarLevels);
  std::copy(coeffs.begin(), coeffs.end(), g.values().begin());
  return crop_clamped(g, image.width(), image.height());
}

Image distort(const Image& image, const DistortionSpec& spec, RandomStream& rng, const Ladder& ladder) {
  check_level(spec.level);
  const auto i = static_cast<std::size_t>(spec.level - 1);
  switch (spec.kind) {
    case Kind::kBlur: return gaussian_blur(image, ladder.blur_sigma[i]);
    case Kind::kAwgn: return add_white_noise(image, ladder.noise_sigma[i], rng);
    case Kind::kJpegLike: return jpeg_like(image, ladder.jpeg_multiplier[i]);
    case Kind::kJp2kLike: return jp2k_like(image, ladder.jp2k_keep[i]);
  }
  fail(ErrorCode::kInvalidArgument, "unknown distortion kind");
}

double psnr(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorCode::kDimensionMismatch, "psnr: image sizes differ");
  }
  if (a.size() == 0) fail(ErrorCode::kEmptyInput, "psnr: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace fitgate::distortion
