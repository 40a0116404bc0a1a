#include <algorithm>
#include <cmath>
#include <numeric>

#include "fitgate/core/error.hpp"
#include "fitgate/core/text.hpp"
#include "fitgate/detector/detector.hpp"
#include "fitgate/simd/kernels.hpp"

namespace fitgate::detector {

namespace {

// Relative threshold below which an alpha update counts as no progress.
constexpr double kAlphaEps = 1e-5;

double rbf(const double* a, const double* b, std::size_t dims, double gamma) {
  return std::exp(-gamma * simd::squared_distance(a, b, dims));
}

class Smo {
 public:
  Smo(const std::vector<double>& x, std::size_t dims, std::span<const int> y, const SvmHyper& h,
      std::uint64_t seed)
      : n_(y.size()), y_(y), c_(h.C), tol_(h.tol), seed_(seed), alpha_(n_, 0.0), err_(n_), k_(n_ * n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i; j < n_; ++j) {
        const double v = rbf(&x[i * dims], &x[j * dims], dims, h.gamma);
        k_[i * n_ + j] = v;
        k_[j * n_ + i] = v;
      }
    }
    // f = 0 initially, so E_i = -y_i.
    for (std::size_t i = 0; i < n_; ++i) err_[i] = -y_[i];
  }

  // Outer loop alternating full sweeps and sweeps over unbounded alphas.
  // Converged once max_passes consecutive full sweeps change nothing.
  void run(const SvmHyper& h, int& full_passes, bool& converged) {
    bool examine_all = true;
    int quiet = 0;
    full_passes = 0;
    converged = false;
    std::size_t sweep = 0;
    const std::size_t sweep_cap = static_cast<std::size_t>(h.max_full_passes) * 100;
    while (sweep < sweep_cap) {
      RandomStream rng = derive_stream(seed_, sweep++);
      order_ = shuffled_indices(n_, rng);
      std::size_t changed = 0;
      if (examine_all) {
        for (std::size_t i = 0; i < n_; ++i) changed += examine(i);
        ++full_passes;
        if (changed == 0) {
          if (++quiet >= h.max_passes) {
            converged = true;
            return;
          }
        } else {
          quiet = 0;
          examine_all = false;
        }
        if (full_passes >= h.max_full_passes) return;
      } else {
        for (std::size_t i = 0; i < n_; ++i) {
          if (unbounded(i)) changed += examine(i);
        }
        if (changed == 0) examine_all = true;
      }
    }
  }

  const std::vector<double>& alphas() const { return alpha_; }
  double bias() const { return b_; }

 private:
  bool unbounded(std::size_t i) const { return alpha_[i] > 0.0 && alpha_[i] < c_; }

  std::size_t examine(std::size_t i2) {
    const double r2 = err_[i2] * y_[i2];
    const double a2 = alpha_[i2];
    if (!((r2 < -tol_ && a2 < c_) || (r2 > tol_ && a2 > 0.0))) return 0;

    // Second index: largest |E1 - E2| among unbounded alphas, then every
    // unbounded alpha, then everything, in the sweep's shuffled order.
    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!unbounded(i) || i == i2) continue;
      const double gap = std::abs(err_[i] - err_[i2]);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best < n_ && take_step(best, i2)) return 1;
    for (std::size_t i : order_) {
      if (unbounded(i) && take_step(i, i2)) return 1;
    }
    for (std::size_t i : order_) {
      if (!unbounded(i) && take_step(i, i2)) return 1;
    }
    return 0;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double a1 = alpha_[i1];
    const double a2 = alpha_[i2];
    const double y1 = y_[i1];
    const double y2 = y_[i2];
    const double e1 = err_[i1];
    const double e2 = err_[i2];
    const double s = y1 * y2;
    double lo;
    double hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c_, c_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c_);
      hi = std::min(c_, a1 + a2);
    }
    if (lo >= hi) return false;
    const double k11 = k_[i1 * n_ + i1];
    const double k12 = k_[i1 * n_ + i2];
    const double k22 = k_[i2 * n_ + i2];
    // A vanishing curvature (duplicate points) leaves a linear objective whose
    // optimum is the end of the segment the gradient points to.
    const double eta = std::max(k11 + k22 - 2.0 * k12, 1e-12);
    double a2n = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    if (std::abs(a2n - a2) < kAlphaEps * (a2n + a2 + kAlphaEps)) return false;
    // Round-off can leave an alpha a hair away from a bound, where it would
    // masquerade as a free support vector; snap it onto the bound. a2 is
    // snapped before a1 absorbs the change, so the equality constraint only
    // sees round-off sized adjustments.
    auto snap_bound = [&](double& a, double eps) {
      if (a < eps) a = 0.0;
      if (a > c_ - eps) a = c_;
    };
    snap_bound(a2n, 1e-8 * c_);
    if (a2n == a2) return false;
    double a1n = std::clamp(a1 + s * (a2 - a2n), 0.0, c_);
    snap_bound(a1n, 1e-12 * c_);

    const double d1 = y1 * (a1n - a1);
    const double d2 = y2 * (a2n - a2);
    const double b1 = b_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = b_ - e2 - d1 * k12 - d2 * k22;
    double bn;
    if (a1n > 0.0 && a1n < c_) {
      bn = b1;
    } else if (a2n > 0.0 && a2n < c_) {
      bn = b2;
    } else {
      bn = 0.5 * (b1 + b2);
    }
    const double db = bn - b_;
    const double* k1 = &k_[i1 * n_];
    const double* k2 = &k_[i2 * n_];
    for (std::size_t k = 0; k < n_; ++k) err_[k] += d1 * k1[k] + d2 * k2[k] + db;
    alpha_[i1] = a1n;
    alpha_[i2] = a2n;
    b_ = bn;
    return true;
  }

  std::size_t n_;
  std::span<const int> y_;
  double c_;
  double tol_;
  std::uint64_t seed_;
  std::vector<double> alpha_;
  std::vector<double> err_;
  std::vector<double> k_;
  std::vector<std::size_t> order_;
  double b_ = 0.0;
};

}  // namespace

FitFeature assemble_feature(const classifier::PredictionVector& pred, const iqa::MosScore& mos) {
  if (pred.size() < 5) fail(ErrorCode::kInvalidArgument, "assemble_feature: need at least 5 classes");
  if (!(mos.normalized >= 0.0 && mos.normalized <= 1.0)) {
    fail(ErrorCode::kDomain, "assemble_feature: MOS outside [0,1]");
  }
  FitFeature f{};
  const auto top = classifier::top_k(pred, 5);
  for (std::size_t i = 0; i < 5; ++i) f[i] = top[i].second;
  f[5] = mos.normalized;
  return f;
}

SvmTrainResult train_svm(std::span<const std::vector<double>> features, std::span<const int> labels,
                         const SvmHyper& hyper, std::uint64_t seed) {
  if (features.empty() || features.size() != labels.size()) {
    fail(ErrorCode::kDimensionMismatch, "train_svm: features and labels must align and be non-empty");
  }
  if (!(hyper.C > 0.0) || !(hyper.gamma > 0.0) || !(hyper.tol > 0.0) || hyper.max_passes < 1) {
    fail(ErrorCode::kConfig, "train_svm: invalid hyperparameters");
  }
  bool pos = false;
  bool neg = false;
  for (int y : labels) {
    if (y == kFit) {
      pos = true;
    } else if (y == kUnfit) {
      neg = true;
    } else {
      fail(ErrorCode::kInvalidArgument, "train_svm: labels must be +1 or -1");
    }
  }
  if (!pos || !neg) fail(ErrorCode::kSingleClass, "train_svm: both classes must be present");
  const std::size_t dims = features[0].size();
  std::vector<double> rows;
  rows.reserve(features.size() * dims);
  for (const auto& f : features) {
    if (f.size() != dims || dims == 0) fail(ErrorCode::kDimensionMismatch, "train_svm: ragged features");
    rows.insert(rows.end(), f.begin(), f.end());
  }

  SvmTrainResult res;
  SvmModel& m = res.model;
  m.C = hyper.C;
  m.gamma = hyper.gamma;
  m.scaler = Scaler::fit(rows, dims);
  m.scaler.apply(rows);

  Smo smo(rows, dims, labels, hyper, seed);
  smo.run(hyper, res.full_passes, res.converged);
  res.alphas = smo.alphas();
  m.bias = smo.bias();
  for (std::size_t i = 0; i < res.alphas.size(); ++i) {
    if (res.alphas[i] > 0.0) {
      m.support.push_back({res.alphas[i] * labels[i],
                           std::vector<double>(rows.begin() + static_cast<std::ptrdiff_t>(i * dims),
                                               rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * dims)),
                           i});
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (svm_classify(m, features[i]).label == labels[i]) ++correct;
  }
  res.train_accuracy = static_cast<double>(correct) / static_cast<double>(features.size());
  return res;
}

Decision svm_classify(const SvmModel& model, std::span<const double> feature) {
  if (feature.size() != model.scaler.dims()) {
    fail(ErrorCode::kDimensionMismatch, "svm_classify: feature dimension mismatch");
  }
  std::vector<double> x(feature.begin(), feature.end());
  model.scaler.apply(x);
  double f = model.bias;
  for (const auto& sv : model.support) f += sv.alpha_y * rbf(sv.vector.data(), x.data(), x.size(), model.gamma);
  return {f >= 0.0 ? kFit : kUnfit, f};
}

KktSummary check_kkt(const SvmModel& model, std::span<const std::vector<double>> features,
                     std::span<const int> labels, std::span<const double> alphas, double tol) {
  if (features.size() != labels.size() || features.size() != alphas.size()) {
    fail(ErrorCode::kDimensionMismatch, "check_kkt: inputs must align");
  }
  KktSummary s;
  double eq = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double a = alphas[i];
    if (a < 0.0 || a > model.C) s.box_ok = false;
    eq += a * labels[i];
    const double yf = labels[i] * svm_classify(model, features[i]).value;
    double v = 0.0;
    if (a == 0.0) {
      v = std::max(0.0, (1.0 - tol) - yf);
    } else if (a < model.C) {
      v = std::max(0.0, std::abs(yf - 1.0) - tol);
    } else {
      v = std::max(0.0, yf - (1.0 + tol));
    }
    if (v > 0.0) ++s.violations;
    s.max_violation = std::max(s.max_violation, v);
  }
  s.dual_equality = std::abs(eq);
  return s;
}

nlohmann::json to_json(const SvmModel& model) {
  nlohmann::json support = nlohmann::json::array();
  for (const auto& sv : model.support) {
    support.push_back({{"alpha_y", sv.alpha_y}, {"vector", sv.vector}, {"train_index", sv.train_index}});
  }
  return {{"C", model.C},
          {"gamma", model.gamma},
          {"scaler", {{"mean", model.scaler.mean}, {"std", model.scaler.std}}},
          {"support", support},
          {"bias", model.bias}};
}

SvmModel svm_from_json(const nlohmann::json& j) {
  try {
    SvmModel m;
    m.C = j.at("C").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    m.scaler.std = j.at("scaler").at("std").get<std::vector<double>>();
    if (m.scaler.mean.size() != m.scaler.std.size() || m.scaler.mean.empty()) {
      fail(ErrorCode::kFormat, "SVM JSON: scaler mean/std mismatch");
    }
    for (const auto& s : j.at("support")) {
      SupportVector sv;
      sv.alpha_y = s.at("alpha_y").get<double>();
      sv.vector = s.at("vector").get<std::vector<double>>();
      sv.train_index = s.value("train_index", std::size_t{0});
      if (sv.vector.size() != m.scaler.dims()) fail(ErrorCode::kFormat, "SVM JSON: support vector size");
      m.support.push_back(std::move(sv));
    }
    m.bias = j.at("bias").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("SVM JSON: ") + e.what());
  }
}

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
  write_text_file(path, to_json(model).dump());
}

SvmModel load_svm(const std::filesystem::path& path) {
  try {
    return svm_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "cannot parse SVM " + path.string() + ": " + e.what());
  }
}

}  // namespace fitgate::detector
