#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "fitgate/core/image.hpp"
#include "fitgate/core/random.hpp"

namespace fitgate::distortion {

enum class Kind { kBlur, kAwgn, kJpegLike, kJp2kLike };

inline constexpr std::array<Kind, 4> kAllKinds{Kind::kBlur, Kind::kAwgn, Kind::kJpegLike,
                                              Kind::kJp2kLike};
inline constexpr int kLevels = 5;

std::string_view kind_name(Kind kind);
// Throws kInvalidArgument for unknown names.
Kind kind_from_name(std::string_view name);

struct DistortionSpec {
  Kind kind = Kind::kBlur;
  int level = 1;  // 1..5
};

// Per-level parameter ladders; index 0 is level 1.
struct Ladder {
  std::array<double, 5> blur_sigma{0.5, 1.0, 2.0, 3.0, 4.0};
  std::array<double, 5> noise_sigma{0.02, 0.05, 0.10, 0.15, 0.25};
  std::array<double, 5> jpeg_multiplier{2, 4, 8, 16, 32};
  std::array<double, 5> jp2k_keep{0.5, 0.25, 0.10, 0.05, 0.02};
};

// Applies one distortion. Only awgn consumes rng.
Image distort(const Image& image, const DistortionSpec& spec, RandomStream& rng,
              const Ladder& ladder = {});

// Building blocks, exposed for testing and for custom ladders.
Image gaussian_blur(const Image& image, double sigma);
Image add_white_noise(const Image& image, double sigma, RandomStream& rng);
Image jpeg_like(const Image& image, double multiplier);
Image jp2k_like(const Image& image, double keep_fraction);

// Normalized 1-D Gaussian taps of radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

// Orthonormal 8x8 type-II DCT and its inverse, in place on a row-major block.
void dct8x8(double* block);
void idct8x8(double* block);

// Luminance quantization table (ITU-T T.81 Annex K), row-major.
extern const std::array<int, 64> kJpegLuminanceTable;

// Multi-level orthonormal 2-D Haar transform in place on a w x h row-major
// buffer; every level halves the low-pass band, which must stay even-sized.
void haar_forward(std::vector<double>& data, int width, int height, int levels);
void haar_inverse(std::vector<double>& data, int width, int height, int levels);

// 10 log10(1 / MSE); +infinity when the images are identical.
double psnr(const Image& a, const Image& b);

}  // namespace fitgate::distortion
