#include <algorithm>
#include <cmath>

#include "fitgate/core/error.hpp"
#include "fitgate/core/stats.hpp"
#include "fitgate/core/text.hpp"
#include "fitgate/iqa/iqa.hpp"
#include "fitgate/simd/kernels.hpp"

namespace fitgate::iqa {

namespace {

// Compensated sum: (sum, error) accumulated with Neumaier's correction.
struct CompensatedSum {
  double sum = 0.0;
  double err = 0.0;
  void add(double x) {
    const double t = sum + x;
    err += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  // Product j*v added exactly: the rounding error of the product comes from fma.
  void add_product(double a, double b) {
    const double p = a * b;
    add(p);
    err += std::fma(a, b, -p);
  }
  double value() const { return sum + err; }
};

void softmax_rows(std::vector<double>& z, std::size_t batch, std::size_t n) {
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = z.data() + b * n;
    const double m = *std::max_element(row, row + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - m);
      sum += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  }
}

// acts[0] = inputs; acts[l+1] = layer l output (post-ReLU, or softmax last).
void forward_all(const Mlp& net, std::span<const double> inputs, std::size_t batch,
                 std::vector<std::vector<double>>& acts) {
  const std::size_t layers = net.layer_count();
  acts.resize(layers + 1);
  acts[0].assign(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(net.sizes[l]);
    const auto out = static_cast<std::size_t>(net.sizes[l + 1]);
    auto& z = acts[l + 1];
    z.resize(batch * out);
    simd::GemmArgs g;
    g.m = batch;
    g.n = out;
    g.k = in;
    g.a = acts[l].data();
    g.lda = in;
    g.b = net.weights[l].data();
    g.ldb = in;
    g.trans_b = true;
    g.c = z.data();
    g.ldc = out;
    simd::gemm(g);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < out; ++j) z[b * out + j] += net.biases[l][j];
    }
    if (l + 1 < layers) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    } else {
      softmax_rows(z, batch, out);
    }
  }
}

void check_geometry(const PatchGeometry& g) {
  if (g.size < 32 || g.stride < 1) fail(ErrorCode::kConfig, "patch size must be >= 32 and stride >= 1");
}

}  // namespace

// ---------------------------------------------------------------------------
// Pooling

std::vector<std::pair<int, int>> patch_origins(int width, int height, const PatchGeometry& geom) {
  check_geometry(geom);
  if (width < geom.size || height < geom.size) {
    fail(ErrorCode::kImageTooSmall, "image smaller than one quality patch");
  }
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y + geom.size <= height; y += geom.stride) {
    for (int x = 0; x + geom.size <= width; x += geom.stride) out.emplace_back(x, y);
  }
  return out;
}

std::vector<NssFeature> patch_features(const Image& image, const PatchGeometry& geom) {
  std::vector<NssFeature> out;
  Grid patch(geom.size, geom.size);
  for (const auto& [x0, y0] : patch_origins(image.width(), image.height(), geom)) {
    for (int y = 0; y < geom.size; ++y) {
      for (int x = 0; x < geom.size; ++x) patch(x, y) = image(x0 + x, y0 + y);
    }
    out.push_back(extract_nss(patch));
  }
  return out;
}

MosScore pool_mos(std::span<const std::vector<double>> distributions) {
  if (distributions.empty()) fail(ErrorCode::kEmptyInput, "pool_mos: no patches");
  // Summed with exact products and compensation so that symmetric inputs hit
  // their closed forms exactly (uniform bins give 35.5).
  CompensatedSum total;
  for (const auto& v : distributions) {
    if (v.size() != static_cast<std::size_t>(kBins)) {
      fail(ErrorCode::kDimensionMismatch, "pool_mos: distributions must have 70 bins");
    }
    CompensatedSum q;
    for (std::size_t j = 0; j < v.size(); ++j) q.add_product(static_cast<double>(j + 1), v[j]);
    total.add(q.value());
  }
  const double raw = std::clamp(total.value() / static_cast<double>(distributions.size()), 1.0, double(kBins));
  return {raw, (raw - 1.0) / (kBins - 1)};
}

MosScore mos_from_normalized(double normalized) {
  if (!(normalized >= 0.0 && normalized <= 1.0)) fail(ErrorCode::kDomain, "MOS must lie in [0,1]");
  return {1.0 + normalized * (kBins - 1), normalized};
}

std::vector<double> soft_target(double mos, double sigma_bins) {
  if (!(mos >= 0.0 && mos <= 1.0)) fail(ErrorCode::kDomain, "proxy MOS must lie in [0,1]");
  if (!(sigma_bins > 0.0)) fail(ErrorCode::kInvalidArgument, "target sigma must be positive");
  const double centre = 1.0 + std::round((kBins - 1) * mos);
  std::vector<double> t(kBins);
  double sum = 0.0;
  for (int j = 1; j <= kBins; ++j) {
    const double d = (j - centre) / sigma_bins;
    t[static_cast<std::size_t>(j - 1)] = std::exp(-0.5 * d * d);
    sum += t[static_cast<std::size_t>(j - 1)];
  }
  for (double& v : t) v /= sum;
  return t;
}

// ---------------------------------------------------------------------------
// MLP

Mlp Mlp::zeros(std::vector<int> sizes) {
  if (sizes.size() < 2) fail(ErrorCode::kInvalidArgument, "mlp needs at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) fail(ErrorCode::kInvalidArgument, "mlp layer sizes must be positive");
  }
  Mlp m;
  m.sizes = std::move(sizes);
  for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
    m.weights.emplace_back(static_cast<std::size_t>(m.sizes[l]) * m.sizes[l + 1], 0.0);
    m.biases.emplace_back(static_cast<std::size_t>(m.sizes[l + 1]), 0.0);
  }
  return m;
}

void Mlp::init_he(RandomStream& rng) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const double stddev = std::sqrt(2.0 / sizes[l]);
    for (double& w : weights[l]) w = rng.normal(0.0, stddev);
    std::fill(biases[l].begin(), biases[l].end(), 0.0);
  }
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> inputs, std::size_t batch) {
  if (inputs.size() != batch * static_cast<std::size_t>(net.sizes.front())) {
    fail(ErrorCode::kDimensionMismatch, "mlp_forward: input size mismatch");
  }
  std::vector<std::vector<double>> acts;
  forward_all(net, inputs, batch, acts);
  return std::move(acts.back());
}

double mlp_loss_and_gradients(const Mlp& net, std::span<const double> inputs,
                              std::span<const double> targets, std::size_t batch, Mlp& gradients) {
  const auto out_n = static_cast<std::size_t>(net.sizes.back());
  if (inputs.size() != batch * static_cast<std::size_t>(net.sizes.front()) ||
      targets.size() != batch * out_n || batch == 0) {
    fail(ErrorCode::kDimensionMismatch, "mlp_loss_and_gradients: size mismatch");
  }
  thread_local std::vector<std::vector<double>> acts;
  forward_all(net, inputs, batch, acts);
  if (gradients.sizes != net.sizes) gradients = Mlp::zeros(net.sizes);

  const double inv = 1.0 / static_cast<double>(batch);
  double loss = 0.0;
  std::vector<double> delta(batch * out_n);
  const auto& probs = acts.back();
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (targets[i] > 0.0) loss -= targets[i] * std::log(std::max(probs[i], 1e-300));
    delta[i] = (probs[i] - targets[i]) * inv;
  }
  std::vector<double> prev;
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const auto in = static_cast<std::size_t>(net.sizes[l]);
    const auto out = static_cast<std::size_t>(net.sizes[l + 1]);
    simd::GemmArgs gw;
    gw.m = out;
    gw.n = in;
    gw.k = batch;
    gw.a = delta.data();
    gw.lda = out;
    gw.trans_a = true;
    gw.b = acts[l].data();
    gw.ldb = in;
    gw.c = gradients.weights[l].data();
    gw.ldc = in;
    simd::gemm(gw);
    auto& gb = gradients.biases[l];
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < out; ++j) gb[j] += delta[b * out + j];
    }
    if (l == 0) break;
    prev.resize(batch * in);
    simd::GemmArgs gi;
    gi.m = batch;
    gi.n = in;
    gi.k = out;
    gi.a = delta.data();
    gi.lda = out;
    gi.b = net.weights[l].data();
    gi.ldb = in;
    gi.c = prev.data();
    gi.ldc = in;
    simd::gemm(gi);
    const auto& a = acts[l];
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (!(a[i] > 0.0)) prev[i] = 0.0;
    }
    delta.swap(prev);
  }
  return loss * inv;
}

// ---------------------------------------------------------------------------
// Training and prediction

double proxy_mos(int level) {
  if (level < 0 || level > 5) fail(ErrorCode::kInvalidArgument, "proxy_mos: level must be 0..5");
  return 0.85 - 0.13 * level;
}

IqaTrainResult train_iqa(std::span<const Image> images, std::span<const double> labels,
                         const IqaHyper& hyper, std::uint64_t seed,
                         const std::function<void(const IqaEpoch&)>& on_epoch) {
  std::vector<std::vector<NssFeature>> features;
  features.reserve(images.size());
  for (const auto& img : images) features.push_back(patch_features(img, hyper.geometry));
  return train_iqa_features(features, labels, hyper, seed, on_epoch);
}

IqaTrainResult train_iqa_features(std::span<const std::vector<NssFeature>> features,
                                  std::span<const double> labels, const IqaHyper& hyper,
                                  std::uint64_t seed,
                                  const std::function<void(const IqaEpoch&)>& on_epoch) {
  if (features.empty()) fail(ErrorCode::kEmptyInput, "train_iqa: empty corpus");
  if (features.size() != labels.size()) fail(ErrorCode::kDimensionMismatch, "train_iqa: labels misaligned");
  if (hyper.batch_size < 1 || hyper.epochs < 0 || !(hyper.learning_rate > 0.0) ||
      hyper.momentum < 0.0 || hyper.momentum >= 1.0) {
    fail(ErrorCode::kConfig, "train_iqa: invalid hyperparameters");
  }
  check_geometry(hyper.geometry);

  // Flatten to one row per patch.
  std::vector<double> rows;
  std::vector<std::vector<double>> targets;
  std::vector<std::size_t> row_target;
  for (std::size_t i = 0; i < features.size(); ++i) {
    targets.push_back(soft_target(labels[i], hyper.target_sigma_bins));
    for (const auto& f : features[i]) {
      rows.insert(rows.end(), f.begin(), f.end());
      row_target.push_back(i);
    }
  }
  const std::size_t n = row_target.size();
  if (n == 0) fail(ErrorCode::kEmptyInput, "train_iqa: no patches");

  IqaTrainResult result;
  IqaModel& model = result.model;
  model.geometry = hyper.geometry;
  model.scaler = Scaler::fit(rows, kNssSize);
  model.scaler.apply(rows);
  std::vector<int> sizes{static_cast<int>(kNssSize)};
  sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  sizes.push_back(kBins);
  model.mlp = Mlp::zeros(sizes);
  RandomStream init = derive_stream(seed, 0);
  model.mlp.init_he(init);

  Mlp velocity = Mlp::zeros(sizes);
  Mlp grads = Mlp::zeros(sizes);
  const auto bs = static_cast<std::size_t>(hyper.batch_size);
  std::vector<double> bx;
  std::vector<double> bt;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    RandomStream rng = derive_stream(seed, 1 + static_cast<std::uint64_t>(epoch));
    const auto order = shuffled_indices(n, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      bx.clear();
      bt.clear();
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t r = order[i];
        bx.insert(bx.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * kNssSize),
                  rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * kNssSize));
        const auto& t = targets[row_target[r]];
        bt.insert(bt.end(), t.begin(), t.end());
      }
      const double loss = mlp_loss_and_gradients(model.mlp, bx, bt, end - start, grads);
      if (!std::isfinite(loss)) {
        fail(ErrorCode::kDivergence, "train_iqa: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += loss * static_cast<double>(end - start);
      for (std::size_t l = 0; l < model.mlp.layer_count(); ++l) {
        auto step = [&](std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g) {
          for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = hyper.momentum * v[i] + g[i];
            w[i] -= hyper.learning_rate * v[i];
          }
        };
        step(model.mlp.weights[l], velocity.weights[l], grads.weights[l]);
        step(model.mlp.biases[l], velocity.biases[l], grads.biases[l]);
      }
    }
    const IqaEpoch rec{epoch, loss_sum / static_cast<double>(n)};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

MosScore predict_mos_features(const IqaModel& model, std::span<const NssFeature> features) {
  if (features.empty()) fail(ErrorCode::kImageTooSmall, "predict_mos: no patches");
  std::vector<double> rows;
  rows.reserve(features.size() * kNssSize);
  for (const auto& f : features) rows.insert(rows.end(), f.begin(), f.end());
  model.scaler.apply(rows);
  const auto probs = mlp_forward(model.mlp, rows, features.size());
  std::vector<std::vector<double>> dists;
  for (std::size_t i = 0; i < features.size(); ++i) {
    dists.emplace_back(probs.begin() + static_cast<std::ptrdiff_t>(i * kBins),
                       probs.begin() + static_cast<std::ptrdiff_t>((i + 1) * kBins));
  }
  return pool_mos(dists);
}

MosScore predict_mos(const IqaModel& model, const Image& image) {
  return predict_mos_features(model, patch_features(image, model.geometry));
}

// ---------------------------------------------------------------------------
// Gating

Verdict threshold_gate(const MosScore& mos, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) fail(ErrorCode::kDomain, "threshold must lie in [0,1]");
  return mos.normalized < tau ? Verdict::kUnfit : Verdict::kFit;
}

double calibrate_threshold(std::span<const double> pristine_normalized, double q) {
  if (pristine_normalized.empty()) fail(ErrorCode::kEmptyInput, "calibrate_threshold: no scores");
  return std::clamp(percentile(pristine_normalized, q), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const IqaModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.mlp.layer_count(); ++l) {
    layers.push_back({{"weights", model.mlp.weights[l]}, {"biases", model.mlp.biases[l]}});
  }
  return {{"sizes", model.mlp.sizes},
          {"layers", layers},
          {"scaler", {{"mean", model.scaler.mean}, {"std", model.scaler.std}}},
          {"patch", {{"size", model.geometry.size}, {"stride", model.geometry.stride}}}};
}

IqaModel iqa_model_from_json(const nlohmann::json& j) {
  try {
    IqaModel m;
    m.mlp = Mlp::zeros(j.at("sizes").get<std::vector<int>>());
    if (m.mlp.sizes.front() != static_cast<int>(kNssSize) || m.mlp.sizes.back() != kBins) {
      fail(ErrorCode::kFormat, "IQA model JSON: sizes must run from 36 to 70");
    }
    const auto& layers = j.at("layers");
    if (layers.size() != m.mlp.layer_count()) fail(ErrorCode::kFormat, "IQA model JSON: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto w = layers[l].at("weights").get<std::vector<double>>();
      auto b = layers[l].at("biases").get<std::vector<double>>();
      if (w.size() != m.mlp.weights[l].size() || b.size() != m.mlp.biases[l].size()) {
        fail(ErrorCode::kFormat, "IQA model JSON: parameter shape mismatch");
      }
      m.mlp.weights[l] = std::move(w);
      m.mlp.biases[l] = std::move(b);
    }
    m.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    m.scaler.std = j.at("scaler").at("std").get<std::vector<double>>();
    if (m.scaler.mean.size() != kNssSize || m.scaler.std.size() != kNssSize) {
      fail(ErrorCode::kFormat, "IQA model JSON: scaler must have 36 entries");
    }
    m.geometry.size = j.at("patch").at("size").get<int>();
    m.geometry.stride = j.at("patch").at("stride").get<int>();
    check_geometry(m.geometry);
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("IQA model JSON: ") + e.what());
  }
}

void save_iqa_model(const IqaModel& model, const std::filesystem::path& path) {
  write_text_file(path, to_json(model).dump());
}

IqaModel load_iqa_model(const std::filesystem::path& path) {
  try {
    return iqa_model_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "cannot parse IQA model " + path.string() + ": " + e.what());
  }
}

}  // namespace fitgate::iqa
