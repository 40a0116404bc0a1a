#include <algorithm>
#include <cmath>
#include <vector>

#include "fitgate/core/error.hpp"
#include "fitgate/iqa/iqa.hpp"

namespace fitgate::iqa {

namespace {

constexpr double kMscnC = 1.0 / 255.0;
constexpr int kWindowRadius = 3;
constexpr double kGammaMin = 0.2;
constexpr double kGammaStep = 0.001;
constexpr int kTableSize = 9801;  // 0.2 .. 10.0 inclusive

const std::array<double, 2 * kWindowRadius + 1>& window_taps() {
  static const auto taps = [] {
    std::array<double, 2 * kWindowRadius + 1> t{};
    const double s = 7.0 / 6.0;
    double sum = 0.0;
    for (int i = -kWindowRadius; i <= kWindowRadius; ++i) {
      t[static_cast<std::size_t>(i + kWindowRadius)] = std::exp(-0.5 * i * i / (s * s));
      sum += t[static_cast<std::size_t>(i + kWindowRadius)];
    }
    for (double& v : t) v /= sum;
    return t;
  }();
  return taps;
}

const std::vector<double>& ratio_table() {
  static const std::vector<double> table = [] {
    std::vector<double> r(kTableSize);
    for (int i = 0; i < kTableSize; ++i) r[static_cast<std::size_t>(i)] = ggd_ratio(kGammaMin + kGammaStep * i);
    return r;
  }();
  return table;
}

Grid downsample2(const Grid& g) {
  const int w = g.width() / 2;
  const int h = g.height() / 2;
  Grid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(x, y) = 0.25 * (g(2 * x, 2 * y) + g(2 * x + 1, 2 * y) + g(2 * x, 2 * y + 1) + g(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

GgdFit ggd_or_flat(std::span<const double> samples) {
  for (double v : samples) {
    if (v != 0.0) return fit_ggd(samples);
  }
  return {2.0, 0.0};
}

AggdFit aggd_or_flat(std::span<const double> samples) {
  bool neg = false;
  bool pos = false;
  double sum_l = 0.0;
  double sum_r = 0.0;
  std::size_t nl = 0;
  std::size_t nr = 0;
  for (double v : samples) {
    if (v < 0.0) {
      neg = true;
      sum_l += v * v;
      ++nl;
    } else if (v > 0.0) {
      pos = true;
      sum_r += v * v;
      ++nr;
    }
  }
  if (neg && pos) return fit_aggd(samples);
  return {2.0, 0.0, nl ? sum_l / static_cast<double>(nl) : 0.0, nr ? sum_r / static_cast<double>(nr) : 0.0};
}

void scale_features(const Grid& g, double* out) {
  const Grid m = compute_mscn(g);
  const GgdFit ggd = ggd_or_flat(m.values());
  out[0] = ggd.gamma;
  out[1] = ggd.sigma2;

  const int w = m.width();
  const int h = m.height();
  // (dx, dy) neighbour offsets: horizontal, vertical, main and anti diagonal.
  constexpr int kOffsets[4][2] = {{1, 0}, {0, 1}, {1, 1}, {-1, 1}};
  std::vector<double> prod;
  for (int o = 0; o < 4; ++o) {
    const int dx = kOffsets[o][0];
    const int dy = kOffsets[o][1];
    prod.clear();
    for (int y = 0; y + dy < h; ++y) {
      for (int x = std::max(0, -dx); x < w && x + dx < w; ++x) prod.push_back(m(x, y) * m(x + dx, y + dy));
    }
    const AggdFit a = aggd_or_flat(prod);
    out[2 + 4 * o] = a.alpha;
    out[3 + 4 * o] = a.eta;
    out[4 + 4 * o] = a.sigma_l2;
    out[5 + 4 * o] = a.sigma_r2;
  }
}

}  // namespace

Grid compute_mscn(const Grid& image) {
  if (image.width() < 16 || image.height() < 16) {
    fail(ErrorCode::kImageTooSmall, "mscn: image must be at least 16x16");
  }
  const auto& t = window_taps();
  constexpr int kTaps = 2 * kWindowRadius + 1;
  const int w = image.width();
  const int h = image.height();
  Grid out(w, h);
  double patch[kTaps * kTaps];
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double centre = image(x, y);
      double mu = 0.0;
      double diff = 0.0;
      for (int dy = 0; dy < kTaps; ++dy) {
        const int sy = reflect_index(y + dy - kWindowRadius, h);
        for (int dx = 0; dx < kTaps; ++dx) {
          const double v = image(reflect_index(x + dx - kWindowRadius, w), sy);
          const double wt = t[static_cast<std::size_t>(dy)] * t[static_cast<std::size_t>(dx)];
          patch[dy * kTaps + dx] = v;
          mu += wt * v;
          // Weighted differences cancel exactly on a flat neighbourhood.
          diff += wt * (centre - v);
        }
      }
      double var = 0.0;
      for (int dy = 0; dy < kTaps; ++dy) {
        for (int dx = 0; dx < kTaps; ++dx) {
          const double d = patch[dy * kTaps + dx] - mu;
          var += t[static_cast<std::size_t>(dy)] * t[static_cast<std::size_t>(dx)] * d * d;
        }
      }
      out(x, y) = diff / (std::sqrt(var) + kMscnC);
    }
  }
  return out;
}

double ggd_ratio(double gamma) {
  if (!(gamma > 0.0)) fail(ErrorCode::kDomain, "ggd_ratio: gamma must be positive");
  return std::exp(2.0 * std::lgamma(2.0 / gamma) - std::lgamma(1.0 / gamma) - std::lgamma(3.0 / gamma));
}

double match_shape(double ratio) {
  const auto& t = ratio_table();
  // r is increasing in gamma; locate the neighbours of `ratio`.
  const auto it = std::lower_bound(t.begin(), t.end(), ratio);
  std::size_t best;
  if (it == t.begin()) {
    best = 0;
  } else if (it == t.end()) {
    best = t.size() - 1;
  } else {
    const auto hi = static_cast<std::size_t>(it - t.begin());
    const std::size_t lo = hi - 1;
    best = (ratio - t[lo] <= t[hi] - ratio) ? lo : hi;
  }
  return kGammaMin + kGammaStep * static_cast<double>(best);
}

GgdFit fit_ggd(std::span<const double> samples) {
  if (samples.size() < kMinFitSamples) {
    fail(ErrorCode::kDegenerateSamples, "fit_ggd: need at least 100 samples");
  }
  double sum_abs = 0.0;
  double sum_sq = 0.0;
  for (double v : samples) {
    sum_abs += std::abs(v);
    sum_sq += v * v;
  }
  if (sum_sq == 0.0) fail(ErrorCode::kDegenerateSamples, "fit_ggd: all samples are zero");
  const double n = static_cast<double>(samples.size());
  const double mean_abs = sum_abs / n;
  const double mean_sq = sum_sq / n;
  return {match_shape(mean_abs * mean_abs / mean_sq), mean_sq};
}

AggdFit fit_aggd(std::span<const double> samples) {
  if (samples.size() < kMinFitSamples) {
    fail(ErrorCode::kDegenerateSamples, "fit_aggd: need at least 100 samples");
  }
  double sum_l = 0.0;
  double sum_r = 0.0;
  double sum_abs = 0.0;
  double sum_sq = 0.0;
  std::size_t nl = 0;
  std::size_t nr = 0;
  for (double v : samples) {
    if (v < 0.0) {
      sum_l += v * v;
      ++nl;
    } else if (v > 0.0) {
      sum_r += v * v;
      ++nr;
    }
    sum_abs += std::abs(v);
    sum_sq += v * v;
  }
  if (nl == 0 || nr == 0) {
    fail(ErrorCode::kDegenerateSamples, "fit_aggd: need both negative and positive samples");
  }
  const double n = static_cast<double>(samples.size());
  AggdFit fit;
  fit.sigma_l2 = sum_l / static_cast<double>(nl);
  fit.sigma_r2 = sum_r / static_cast<double>(nr);
  const double sl = std::sqrt(fit.sigma_l2);
  const double sr = std::sqrt(fit.sigma_r2);
  const double g = sr / sl;
  const double mean_abs = sum_abs / n;
  const double r_hat = mean_abs * mean_abs / (sum_sq / n);
  const double big_r = r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));
  fit.alpha = match_shape(big_r);
  fit.eta = (sr - sl) * std::exp(std::lgamma(2.0 / fit.alpha) - std::lgamma(1.0 / fit.alpha));
  return fit;
}

NssFeature extract_nss(const Grid& image) {
  if (image.width() < 32 || image.height() < 32) {
    fail(ErrorCode::kImageTooSmall, "extract_nss: image must be at least 32x32");
  }
  NssFeature f{};
  scale_features(image, f.data());
  scale_features(downsample2(image), f.data() + 18);
  return f;
}

}  // namespace fitgate::iqa
