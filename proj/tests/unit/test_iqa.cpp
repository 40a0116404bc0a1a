#include <cmath>
#include <numeric>

#include "../support/generators.hpp"
#include "../support/oracles.hpp"
#include "doctest.h"
#include "fitgate/core/error.hpp"
#include "fitgate/datagen/shapes.hpp"
#include "fitgate/distortion/distort.hpp"
#include "fitgate/iqa/iqa.hpp"

using namespace fitgate;
using namespace fitgate::iqa;

namespace {

std::vector<double> normal_samples(std::uint64_t seed, std::size_t n, double sd = 1.0) {
  RandomStream rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

std::vector<double> laplace_samples(std::uint64_t seed, std::size_t n) {
  RandomStream rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) {
    const double e = -std::log(1.0 - rng.uniform());
    x = rng.uniform() < 0.5 ? -e : e;
  }
  return v;
}

double ratio_oracle(double g) {
  return std::exp(2 * std::lgamma(2 / g) - std::lgamma(1 / g) - std::lgamma(3 / g));
}

std::vector<Image> shapes(int n, std::uint64_t seed = 91) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(datagen::render_shape(i % 10, derive_stream(seed, i)));
  return out;
}

}  // namespace

TEST_CASE("mscn of a constant image is exactly zero") {
  for (double c : {0.0, 0.37, 1.0}) {
    const Grid m = compute_mscn(Image::filled(40, 24, c));
    for (double v : m.values()) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(compute_mscn(Image::filled(15, 40, 0.5)), Error);
}

TEST_CASE("mscn coefficients are close to zero-mean on rendered shapes") {
  for (const auto& img : shapes(20)) {
    const Grid m = compute_mscn(img);
    const double mean = std::accumulate(m.values().begin(), m.values().end(), 0.0) / m.size();
    CHECK(std::abs(mean) <= 0.05);
  }
}

TEST_CASE("mscn is nearly invariant to halving the contrast of a textured image") {
  RandomStream rng(5);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> v(48 * 48), half(48 * 48);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = rng.uniform(0.2, 0.8);
      half[i] = 0.5 * v[i];
    }
    const Grid a = compute_mscn(Image(48, 48, v));
    const Grid b = compute_mscn(Image(48, 48, half));
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    CHECK(worst <= 0.1);
  }
}

TEST_CASE("ggd shape ratio follows the gamma-function formula") {
  for (double g : {0.2, 0.5, 1.0, 2.0, 3.7, 10.0}) CHECK(ggd_ratio(g) == doctest::Approx(ratio_oracle(g)).epsilon(1e-12));
  CHECK(ggd_ratio(2.0) == doctest::Approx(2.0 / std::numbers::pi));
  CHECK_THROWS_AS(ggd_ratio(0.0), Error);
  // The table is on a 0.001 grid and returns its own nodes.
  for (double g : {0.2, 0.731, 1.5, 9.999}) CHECK(match_shape(ggd_ratio(g)) == doctest::Approx(g).epsilon(1e-9));
  CHECK(match_shape(0.0) == doctest::Approx(0.2));
  CHECK(match_shape(1.0) == doctest::Approx(10.0));
}

TEST_CASE("fit_ggd recovers gaussian and laplacian shapes") {
  const auto n = normal_samples(11, 100000);
  const GgdFit gn = fit_ggd(n);
  CHECK(gn.gamma >= 1.9);
  CHECK(gn.gamma <= 2.1);
  CHECK(gn.sigma2 >= 0.95);
  CHECK(gn.sigma2 <= 1.05);

  const GgdFit gl = fit_ggd(laplace_samples(12, 100000));
  CHECK(gl.gamma >= 0.9);
  CHECK(gl.gamma <= 1.1);
}

TEST_CASE("fit_ggd recovers the shape of generalised gaussian draws") {
  for (double g : {0.5, 1.0, 2.0}) {
    const GgdFit f = fit_ggd(testing::ggd_samples(100 + static_cast<std::uint64_t>(g * 10), 100000, g));
    CHECK(f.gamma == doctest::Approx(g).epsilon(0.10));
  }
}

TEST_CASE("fit_ggd is scale equivariant") {
  auto x = normal_samples(13, 5000);
  const GgdFit base = fit_ggd(x);
  for (double c : {0.01, 3.0, -2.5}) {
    std::vector<double> y(x);
    for (auto& v : y) v *= c;
    const GgdFit f = fit_ggd(y);
    CHECK(std::abs(f.gamma - base.gamma) <= 0.001 + 1e-12);
    CHECK(f.sigma2 == doctest::Approx(base.sigma2 * c * c).epsilon(1e-10));
  }
}

TEST_CASE("fit_ggd rejects degenerate samples") {
  CHECK_THROWS_AS(fit_ggd(std::vector<double>(99, 1.0)), Error);
  try {
    fit_ggd(std::vector<double>(500, 0.0));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateSamples);
  }
}

TEST_CASE("fit_aggd on symmetric samples reduces to the ggd") {
  const AggdFit f = fit_aggd(normal_samples(21, 100000));
  CHECK(std::abs(f.eta) <= 0.05);
  CHECK(f.alpha >= 1.8);
  CHECK(f.alpha <= 2.2);
  CHECK(f.sigma_l2 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(f.sigma_r2 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("fit_aggd reflects under negation") {
  RandomStream rng(22);
  std::vector<double> x(20000);
  for (auto& v : x) v = rng.uniform() < 0.7 ? std::abs(rng.normal()) : -0.4 * std::abs(rng.normal());
  std::vector<double> neg(x);
  for (auto& v : neg) v = -v;
  const AggdFit a = fit_aggd(x), b = fit_aggd(neg);
  CHECK(b.eta == doctest::Approx(-a.eta).epsilon(1e-9));
  CHECK(b.sigma_l2 == doctest::Approx(a.sigma_r2).epsilon(1e-12));
  CHECK(b.sigma_r2 == doctest::Approx(a.sigma_l2).epsilon(1e-12));
  CHECK(std::abs(a.alpha - b.alpha) <= 0.001 + 1e-12);
}

TEST_CASE("fit_aggd reports positive eta for a right-skewed mixture") {
  const AggdFit f = fit_aggd(testing::right_skewed_samples(23, 50000));
  CHECK(f.eta > 0.0);
  CHECK(f.sigma_r2 > f.sigma_l2);
}

TEST_CASE("fit_aggd needs samples on both sides") {
  std::vector<double> pos(200);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = 1.0 + static_cast<double>(i);
  CHECK_THROWS_AS(fit_aggd(pos), Error);
  CHECK_THROWS_AS(fit_aggd(std::vector<double>(50, -1.0)), Error);
}

TEST_CASE("extract_nss has 36 valid entries and is deterministic") {
  for (const auto& img : shapes(10)) {
    const NssFeature a = extract_nss(img), b = extract_nss(img);
    CHECK(a.size() == 36);
    CHECK(a == b);
    for (int s = 0; s < 2; ++s) {
      const double* f = a.data() + 18 * s;
      CHECK(f[0] > 0.0);
      CHECK(f[1] >= 0.0);
      for (int o = 0; o < 4; ++o) {
        CHECK(f[2 + 4 * o] > 0.0);
        CHECK(f[4 + 4 * o] >= 0.0);
        CHECK(f[5 + 4 * o] >= 0.0);
      }
    }
  }
  CHECK_THROWS_AS(extract_nss(Image::filled(31, 64, 0.5)), Error);
}

TEST_CASE("extract_nss handles flat patches") {
  const NssFeature f = extract_nss(Image::filled(32, 32, 0.5));
  CHECK(f[0] == 2.0);
  CHECK(f[1] == 0.0);
  for (double v : f) CHECK(std::isfinite(v));
}

TEST_CASE("heavy blur lowers the full-scale mscn variance") {
  for (const auto& img : shapes(20, 93)) {
    RandomStream rng(0);
    const Image blurred = distortion::distort(img, {distortion::Kind::kBlur, 5}, rng);
    CHECK(extract_nss(blurred)[1] < extract_nss(img)[1]);
  }
}

TEST_CASE("patch origins cover the image on the stride grid") {
  const auto o = patch_origins(64, 64, {32, 16});
  REQUIRE(o.size() == 9);
  const std::vector<std::pair<int, int>> expect{{0, 0},  {16, 0},  {32, 0},  {0, 16}, {16, 16},
                                                {32, 16}, {0, 32}, {16, 32}, {32, 32}};
  // (x, y) pairs, row-major.
  for (std::size_t i = 0; i < o.size(); ++i) CHECK(o[i] == expect[i]);
  CHECK(patch_origins(32, 32, {32, 16}).size() == 1);
  CHECK(patch_origins(80, 48, {32, 16}).size() == 4 * 2);
  CHECK_THROWS_AS(patch_origins(31, 64, {32, 16}), Error);
  CHECK(patch_features(shapes(1)[0], {32, 16}).size() == 9);
}

TEST_CASE("pool_mos closed forms") {
  std::vector<std::vector<double>> uniform(9, std::vector<double>(70, 1.0 / 70));
  const MosScore u = pool_mos(uniform);
  CHECK(u.raw_q == 35.5);
  CHECK(u.normalized == 0.5);

  std::vector<std::vector<double>> top(4, std::vector<double>(70, 0.0)), bottom(top);
  for (auto& v : top) v[69] = 1.0;
  for (auto& v : bottom) v[0] = 1.0;
  CHECK(pool_mos(top).raw_q == 70.0);
  CHECK(pool_mos(top).normalized == 1.0);
  CHECK(pool_mos(bottom).raw_q == 1.0);
  CHECK(pool_mos(bottom).normalized == 0.0);

  // Mixed patches average their expected bins.
  std::vector<std::vector<double>> mixed{top[0], bottom[0]};
  CHECK(pool_mos(mixed).raw_q == doctest::Approx(35.5));

  CHECK_THROWS_AS(pool_mos(std::vector<std::vector<double>>{}), Error);
  CHECK_THROWS_AS(pool_mos(std::vector<std::vector<double>>{std::vector<double>(69, 0.0)}), Error);
}

TEST_CASE("pool_mos respects normalized = (raw_q - 1) / 69 on random distributions") {
  RandomStream rng(31);
  for (int t = 0; t < 200; ++t) {
    const int p = testing::random_int(rng, 1, 12);
    std::vector<std::vector<double>> d(static_cast<std::size_t>(p));
    for (auto& v : d) {
      v = testing::random_vector(rng, 70, 0.0, 1.0);
      const double s = std::accumulate(v.begin(), v.end(), 0.0);
      for (auto& x : v) x /= s;
    }
    const MosScore m = pool_mos(d);
    CHECK(m.raw_q >= 1.0);
    CHECK(m.raw_q <= 70.0);
    CHECK(m.normalized == doctest::Approx((m.raw_q - 1) / 69).epsilon(1e-14));
  }
}

TEST_CASE("soft targets peak at the rounded bin") {
  auto peak = [](const std::vector<double>& t) {
    return 1 + static_cast<int>(std::max_element(t.begin(), t.end()) - t.begin());
  };
  const auto half = soft_target(0.5);
  CHECK(half.size() == 70);
  CHECK(peak(half) == 36);
  const auto one = soft_target(1.0);
  CHECK(peak(one) == 70);
  CHECK(std::accumulate(one.begin(), one.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  // Half-Gaussian: bin 69 carries exp(-1/8) of bin 70's mass.
  CHECK(one[68] / one[69] == doctest::Approx(std::exp(-0.125)));
  CHECK(peak(soft_target(0.0)) == 1);
  CHECK(peak(soft_target(proxy_mos(3))) == 1 + static_cast<int>(std::lround(69 * 0.46)));
  CHECK_THROWS_AS(soft_target(1.2), Error);
  CHECK_THROWS_AS(soft_target(0.5, 0.0), Error);
}

TEST_CASE("proxy labels follow the level ladder") {
  CHECK(proxy_mos(0) == doctest::Approx(0.85));
  const double expect[] = {0.72, 0.59, 0.46, 0.33, 0.20};
  for (int l = 1; l <= 5; ++l) CHECK(proxy_mos(l) == doctest::Approx(expect[l - 1]));
  CHECK_THROWS_AS(proxy_mos(6), Error);
}

TEST_CASE("threshold gate uses a strict inequality") {
  CHECK(threshold_gate(mos_from_normalized(0.271), 0.3) == Verdict::kUnfit);
  CHECK(threshold_gate(mos_from_normalized(0.429), 0.3) == Verdict::kFit);
  CHECK(threshold_gate(mos_from_normalized(0.3), 0.3) == Verdict::kFit);
  CHECK(threshold_gate(mos_from_normalized(0.0), 0.0) == Verdict::kFit);
  CHECK(threshold_gate(mos_from_normalized(0.99), 1.0) == Verdict::kUnfit);
  CHECK_THROWS_AS(threshold_gate(mos_from_normalized(0.5), -0.01), Error);
  CHECK_THROWS_AS(threshold_gate(mos_from_normalized(0.5), 1.01), Error);
  CHECK_THROWS_AS(mos_from_normalized(1.5), Error);
}

TEST_CASE("calibrated threshold is the 5th percentile") {
  std::vector<double> s(101);
  for (int i = 0; i <= 100; ++i) s[static_cast<std::size_t>(i)] = (100 - i) / 100.0;
  CHECK(calibrate_threshold(s) == doctest::Approx(0.05));
  CHECK(calibrate_threshold(s, 50) == doctest::Approx(0.5));
  CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}), Error);
}

TEST_CASE("mlp outputs are probability distributions") {
  Mlp net = Mlp::zeros({36, 64, 64, 70});
  RandomStream rng(41);
  net.init_he(rng);
  const auto x = testing::random_vector(rng, 36 * 16, -3, 3);
  const auto out = mlp_forward(net, x, 16);
  REQUIRE(out.size() == 70 * 16);
  for (int b = 0; b < 16; ++b) {
    double s = 0;
    for (int j = 0; j < 70; ++j) {
      CHECK(out[b * 70 + j] >= 0.0);
      s += out[b * 70 + j];
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(mlp_forward(net, x, 15), Error);
}

TEST_CASE("mlp analytic gradients match central differences") {
  Mlp net = Mlp::zeros({7, 6, 5, 9});
  RandomStream rng(42);
  net.init_he(rng);
  for (auto& b : net.biases) {
    for (auto& v : b) v = rng.uniform(-0.1, 0.1);
  }
  const std::size_t batch = 4;
  const auto x = testing::random_vector(rng, 7 * batch, -2, 2);
  std::vector<double> t(9 * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    double s = 0;
    for (int j = 0; j < 9; ++j) s += t[b * 9 + j] = rng.uniform(0.01, 1.0);
    for (int j = 0; j < 9; ++j) t[b * 9 + j] /= s;
  }
  Mlp grads = Mlp::zeros(net.sizes);
  mlp_loss_and_gradients(net, x, t, batch, grads);
  Mlp scratch = Mlp::zeros(net.sizes);
  auto loss = [&](const Mlp& m) { return mlp_loss_and_gradients(m, x, t, batch, scratch); };

  const double h = 1e-5;
  double worst = 0;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (int which = 0; which < 2; ++which) {
      auto& params = which == 0 ? net.weights[l] : net.biases[l];
      const auto& an = which == 0 ? grads.weights[l] : grads.biases[l];
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = loss(net);
        params[i] = keep - h;
        const double down = loss(net);
        params[i] = keep;
        worst = std::max(worst, testing::rel_err(an[i], (up - down) / (2 * h)));
      }
    }
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("iqa training lowers the loss and separates quality levels") {
  const auto src = shapes(24, 97);
  std::vector<Image> images;
  std::vector<double> labels;
  RandomStream rng(3);
  for (const auto& img : src) {
    images.push_back(img);
    labels.push_back(proxy_mos(0));
    images.push_back(distortion::distort(img, {distortion::Kind::kBlur, 5}, rng));
    labels.push_back(proxy_mos(5));
  }
  IqaHyper hyper;
  hyper.epochs = 6;
  std::vector<double> losses;
  const auto result = train_iqa(images, labels, hyper, 17, [&](const IqaEpoch& e) { losses.push_back(e.loss); });
  REQUIRE(result.history.size() == 6);
  REQUIRE(losses.size() == 6);
  for (int e = 1; e < 5; ++e) CHECK(result.history[e].loss < result.history[0].loss);
  CHECK(result.history[4].loss < result.history[0].loss);

  double pristine = 0, blurred = 0;
  for (std::size_t i = 0; i < images.size(); i += 2) {
    pristine += predict_mos(result.model, images[i]).normalized;
    blurred += predict_mos(result.model, images[i + 1]).normalized;
  }
  CHECK(pristine > blurred);

  const auto again = train_iqa(images, labels, hyper, 17);
  CHECK(again.model.mlp.weights == result.model.mlp.weights);

  CHECK_THROWS_AS(train_iqa(std::span<const Image>{}, std::span<const double>{}, hyper, 1), Error);
  CHECK_THROWS_AS(predict_mos(result.model, Image::filled(16, 16, 0.5)), Error);
}

TEST_CASE("iqa model json round trip preserves predictions") {
  IqaModel m;
  m.mlp = Mlp::zeros({36, 8, 70});
  RandomStream rng(51);
  m.mlp.init_he(rng);
  m.scaler.mean = testing::random_vector(rng, 36);
  m.scaler.std = testing::random_vector(rng, 36, 0.5, 2.0);
  const IqaModel back = iqa_model_from_json(to_json(m));
  CHECK(back.mlp.weights == m.mlp.weights);
  CHECK(back.mlp.biases == m.mlp.biases);
  CHECK(back.scaler.mean == m.scaler.mean);
  CHECK(back.geometry.size == 32);
  CHECK(back.geometry.stride == 16);
  const Image img = shapes(1)[0];
  CHECK(predict_mos(back, img).raw_q == predict_mos(m, img).raw_q);

  auto j = to_json(m);
  j["scaler"]["mean"].erase(0);
  CHECK_THROWS_AS(iqa_model_from_json(j), Error);
}
