#include "fitgate/adversarial/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fitgate/core/error.hpp"
#include "fitgate/core/text.hpp"
#include "fitgate/simd/kernels.hpp"

namespace fitgate::adversarial {

using classifier::forward;
using classifier::logit_jacobian;

namespace {

int argmax_of(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

Image add_scaled(const Image& x, const Grid& r, double scale) {
  Grid g = x.grid();
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] += scale * r.values()[i];
  return Image::clamped(std::move(g));
}

void check_class(const Network& net, int c) {
  if (c < 0 || c >= net.class_count()) {
    fail(ErrorCode::kInvalidArgument, "class index " + std::to_string(c) + " out of range");
  }
}

}  // namespace

AttackResult fgsm(const Network& net, const Image& image, int label, double epsilon) {
  check_class(net, label);
  if (!(epsilon >= 0.0)) fail(ErrorCode::kInvalidArgument, "fgsm: epsilon must be non-negative");
  AttackResult res;
  res.original_class = forward(net, image).argmax();
  const Grid grad = classifier::input_gradient(net, image, classifier::CrossEntropyLoss{label});
  Grid g = image.grid();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = grad.values()[i];
    const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    g.values()[i] += epsilon * s;
  }
  res.adversarial = Image::clamped(std::move(g));
  res.iterations = 1;
  res.adversarial_class = forward(net, res.adversarial).argmax();
  res.success = res.adversarial_class != res.original_class;
  return res;
}

DeepFoolStep deepfool_step(const Network& net, const Image& image, const DeepFoolOptions& options) {
  if (options.max_iter < 0 || !(options.overshoot >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "deepfool: invalid options");
  }
  const std::size_t n = image.size();
  const double scale = 1.0 + options.overshoot;
  Grid r_tot(image.width(), image.height());
  DeepFoolStep out;
  AttackResult& res = out.result;

  Image x = image;
  auto jac = logit_jacobian(net, x);
  res.original_class = argmax_of(jac.logits);
  int current = res.original_class;
  const int classes = net.class_count();
  std::vector<double> w(n);
  while (current == res.original_class && res.iterations < options.max_iter) {
    const int c = res.original_class;
    const double* gc = jac.gradients[static_cast<std::size_t>(c)].data();
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    double best_norm2 = 0.0;
    for (int k = 0; k < classes; ++k) {
      if (k == c) continue;
      const double* gk = jac.gradients[static_cast<std::size_t>(k)].data();
      const double norm2 = simd::squared_distance(gk, gc, n);
      if (!(norm2 > 0.0)) continue;
      const double f = std::abs(jac.logits[static_cast<std::size_t>(k)] - jac.logits[static_cast<std::size_t>(c)]);
      const double dist = f / std::sqrt(norm2);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
        best_norm2 = norm2;
      }
    }
    if (best < 0) break;  // flat logits: no direction to move in
    const double* gk = jac.gradients[static_cast<std::size_t>(best)].data();
    const double f = std::abs(jac.logits[static_cast<std::size_t>(best)] - jac.logits[static_cast<std::size_t>(c)]);
    const double step = f / best_norm2;
    for (std::size_t i = 0; i < n; ++i) r_tot.values()[i] += step * (gk[i] - gc[i]);
    ++res.iterations;
    x = add_scaled(image, r_tot, scale);
    jac = logit_jacobian(net, x);
    current = argmax_of(jac.logits);
  }
  res.adversarial = std::move(x);
  res.adversarial_class = current;
  res.success = current != res.original_class;
  out.perturbation = std::move(r_tot);
  for (double& v : out.perturbation.values()) v *= scale;
  return out;
}

AttackResult deepfool(const Network& net, const Image& image, const DeepFoolOptions& options,
                      std::optional<int> reference_class) {
  if (reference_class) {
    check_class(net, *reference_class);
    const int c = forward(net, image).argmax();
    if (c != *reference_class) return AttackResult{image, true, 0, c, c};
  }
  return deepfool_step(net, image, options).result;
}

Image apply_perturbation(const Image& image, const Grid& v) {
  if (!image.grid().same_shape(v)) fail(ErrorCode::kDimensionMismatch, "perturbation size differs from image");
  return add_scaled(image, v, 1.0);
}

double fooling_rate(const Network& net, std::span<const Image> images, const Grid& v) {
  if (images.empty()) fail(ErrorCode::kEmptyInput, "fooling_rate: no images");
  std::size_t fooled = 0;
  for (const auto& x : images) {
    if (forward(net, apply_perturbation(x, v)).argmax() != forward(net, x).argmax()) ++fooled;
  }
  return static_cast<double>(fooled) / static_cast<double>(images.size());
}

PerturbationMap universal_perturbation(const Network& net, std::span<const Image> images,
                                       const UniversalOptions& options, std::uint64_t seed) {
  if (images.size() < 100) fail(ErrorCode::kInvalidArgument, "universal_perturbation: need at least 100 images");
  if (!(options.xi >= 0.0) || options.max_epochs < 0) {
    fail(ErrorCode::kInvalidArgument, "universal_perturbation: invalid options");
  }
  const int w = images[0].width();
  const int h = images[0].height();
  PerturbationMap map;
  map.values = Grid(w, h);
  map.xi = options.xi;
  if (options.xi == 0.0) return map;

  std::vector<int> clean(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) clean[i] = forward(net, images[i]).argmax();
  auto rate = [&] {
    std::size_t fooled = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (forward(net, apply_perturbation(images[i], map.values)).argmax() != clean[i]) ++fooled;
    }
    return static_cast<double>(fooled) / static_cast<double>(images.size());
  };

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    RandomStream rng = derive_stream(seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t idx : shuffled_indices(images.size(), rng)) {
      const Image xv = apply_perturbation(images[idx], map.values);
      if (forward(net, xv).argmax() != clean[idx]) continue;
      const DeepFoolStep df = deepfool_step(net, xv, options.deepfool);
      if (!df.result.success) continue;
      for (std::size_t i = 0; i < map.values.size(); ++i) {
        map.values.values()[i] = std::clamp(map.values.values()[i] + df.perturbation.values()[i], -options.xi, options.xi);
      }
    }
    map.epochs = epoch + 1;
    map.fooling_rate = rate();
    if (map.fooling_rate >= options.target_fool_rate) break;
  }
  return map;
}

AttackResult gradient_ascent_fool(const Network& net, int target_class, const Image& mean_img,
                                  const FoolOptions& options, std::uint64_t seed) {
  check_class(net, target_class);
  if (options.max_iter < 0 || !(options.alpha > 0.0) || !(options.init_noise >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "gradient_ascent_fool: invalid options");
  }
  RandomStream rng = derive_stream(seed, 0);
  Grid g = mean_img.grid();
  for (double& v : g.values()) v += rng.uniform(-options.init_noise, options.init_noise);
  Image x = Image::clamped(std::move(g));

  AttackResult res;
  res.original_class = forward(net, x).argmax();
  const classifier::Objective obj = classifier::LogitOfClass{target_class};
  for (;;) {
    auto lg = classifier::logits_and_gradient(net, x, obj);
    const auto probs = classifier::softmax(lg.logits);
    res.adversarial_class = argmax_of(lg.logits);
    if (probs[static_cast<std::size_t>(target_class)] >= options.confidence_target) {
      res.success = true;
      break;
    }
    if (res.iterations >= options.max_iter) break;
    x = add_scaled(x, lg.gradient, options.alpha);
    ++res.iterations;
  }
  res.adversarial = std::move(x);
  return res;
}

Image mean_image(std::span<const Image> images) {
  if (images.empty()) fail(ErrorCode::kEmptyInput, "mean_image: no images");
  Grid acc(images[0].width(), images[0].height());
  for (const auto& img : images) {
    if (!img.grid().same_shape(acc)) fail(ErrorCode::kDimensionMismatch, "mean_image: mixed sizes");
    for (std::size_t i = 0; i < acc.size(); ++i) acc.values()[i] += img.values()[i];
  }
  for (double& v : acc.values()) v /= static_cast<double>(images.size());
  return Image::clamped(std::move(acc));
}

int random_other_class(int true_class, int class_count, RandomStream& rng) {
  if (class_count < 2 || true_class < 0 || true_class >= class_count) {
    fail(ErrorCode::kInvalidArgument, "random_other_class: invalid classes");
  }
  const auto k = static_cast<int>(rng.below(static_cast<std::uint64_t>(class_count - 1)));
  return k < true_class ? k : k + 1;
}

nlohmann::json to_json(const PerturbationMap& map) {
  return {{"width", map.values.width()},
          {"height", map.values.height()},
          {"xi", map.xi},
          {"fooling_rate", map.fooling_rate},
          {"epochs", map.epochs},
          {"values", std::vector<double>(map.values.values().begin(), map.values.values().end())}};
}

PerturbationMap perturbation_from_json(const nlohmann::json& j) {
  try {
    PerturbationMap m;
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    auto values = j.at("values").get<std::vector<double>>();
    if (w <= 0 || h <= 0 || values.size() != static_cast<std::size_t>(w) * h) {
      fail(ErrorCode::kFormat, "perturbation JSON: size mismatch");
    }
    m.values = Grid(w, h, std::move(values));
    m.xi = j.at("xi").get<double>();
    m.fooling_rate = j.value("fooling_rate", 0.0);
    m.epochs = j.value("epochs", 0);
    for (double v : m.values.values()) {
      if (std::abs(v) > m.xi) fail(ErrorCode::kFormat, "perturbation JSON: entry exceeds xi");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("perturbation JSON: ") + e.what());
  }
}

void save_perturbation(const PerturbationMap& map, const std::filesystem::path& path) {
  write_text_file(path, to_json(map).dump());
}

PerturbationMap load_perturbation(const std::filesystem::path& path) {
  try {
    return perturbation_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "cannot parse perturbation " + path.string() + ": " + e.what());
  }
}

}  // namespace fitgate::adversarial
