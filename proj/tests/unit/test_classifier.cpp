#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "../support/generators.hpp"
#include "doctest.h"
#include "fitgate/classifier/network.hpp"
#include "fitgate/core/error.hpp"
#include "fitgate/datagen/shapes.hpp"

using namespace fitgate;
using namespace fitgate::classifier;

namespace {

// Conv (stride 1 and 2, padding), relu, pool, flatten, dense: every layer kind.
Network mini_network(std::uint64_t seed) {
  Network net({LayerSpec::conv(3, 3, 1), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::conv(4, 3, 1, 2),
               LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(6), LayerSpec::relu(),
               LayerSpec::dense(5), LayerSpec::softmax()},
              TensorShape{1, 12, 12});
  RandomStream rng(seed);
  net.init_he(rng);
  // Non-zero biases so relu kinks are not hit at exactly zero.
  for (auto& p : net.params()) {
    for (auto& b : p.biases) b = rng.uniform(-0.1, 0.1);
  }
  return net;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

double batch_loss(const Network& net, const std::vector<Image>& images, const std::vector<int>& labels) {
  double s = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    s -= std::log(forward(net, images[i]).probs[static_cast<std::size_t>(labels[i])]);
  }
  return s / static_cast<double>(images.size());
}

}  // namespace

TEST_CASE("default architecture shapes") {
  const Network net = Network::make_default();
  CHECK(net.input_shape() == TensorShape{1, 64, 64});
  CHECK(net.class_count() == 10);
  CHECK(net.architecture().back().kind == LayerKind::kSoftmax);
  CHECK(net.parameter_count() > 0);
  CHECK_THROWS_AS(Network({LayerSpec::dense(3)}, TensorShape{1, 4, 4}), Error);
}

TEST_CASE("zero parameters give a uniform prediction") {
  const Network net = Network::make_default();
  const auto pred = forward(net, Image::filled(64, 64, 0.3));
  for (double p : pred.probs) CHECK(p == doctest::Approx(0.1));
  CHECK(pred.argmax() == 0);
  const auto top = top_k(pred, 5);
  for (int i = 0; i < 5; ++i) CHECK(top[static_cast<std::size_t>(i)].first == i);
}

TEST_CASE("softmax is shift invariant and stable") {
  const std::vector<double> a{1, 2, 3}, b{1001, 1002, 1003};
  const auto pa = softmax(a), pb = softmax(b);
  for (int i = 0; i < 3; ++i) CHECK(pa[i] == doctest::Approx(pb[i]));
  CHECK(std::accumulate(pb.begin(), pb.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("top_k orders by probability with lower class first on ties") {
  PredictionVector p{{0.1, 0.3, 0.3, 0.05, 0.25}};
  const auto top = top_k(p, 3);
  CHECK(top[0].first == 1);
  CHECK(top[1].first == 2);
  CHECK(top[2].first == 4);
  CHECK_THROWS_AS(top_k(p, 6), Error);
}

TEST_CASE("forward rejects mismatched images") {
  const Network net = mini_network(1);
  CHECK_THROWS_AS(forward(net, Image::filled(10, 12, 0.5)), Error);
}

TEST_CASE("parameter gradients match central finite differences") {
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rng(21);
  const Network net = mini_network(7);
  std::vector<Image> images;
  std::vector<int> labels;
  for (int i = 0; i < 3; ++i) {
    images.push_back(testing::random_image(rng, 12, 12));
    labels.push_back(i % 5);
  }
  std::vector<LayerParams> grads;
  const double loss = loss_and_gradients(net, images, labels, grads);
  CHECK(loss == doctest::Approx(batch_loss(net, images, labels)).epsilon(1e-12));

  const double h = 1e-5;
  double worst = 0;
  for (std::size_t l = 0; l < net.params().size(); ++l) {
    for (int which = 0; which < 2; ++which) {
      const auto& vals = which == 0 ? net.params()[l].weights : net.params()[l].biases;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        Network plus = net, minus = net;
        (which == 0 ? plus.params()[l].weights : plus.params()[l].biases)[i] += h;
        (which == 0 ? minus.params()[l].weights : minus.params()[l].biases)[i] -= h;
        const double fd = (batch_loss(plus, images, labels) - batch_loss(minus, images, labels)) / (2 * h);
        const double an = (which == 0 ? grads[l].weights : grads[l].biases)[i];
        worst = std::max(worst, rel_err(an, fd));
      }
    }
  }
  CHECK(worst <= 1e-3);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 30.0);
}

TEST_CASE("input gradients match finite differences for both objectives") {
  RandomStream rng(22);
  const Network net = mini_network(8);
  const Image img = testing::random_image(rng, 12, 12);
  const double h = 1e-6;
  for (int obj = 0; obj < 2; ++obj) {
    const Objective objective = obj == 0 ? Objective{CrossEntropyLoss{2}} : Objective{LogitOfClass{3}};
    auto value = [&](const Grid& g) {
      // Finite differences may leave [0,1]; evaluate through a Grid copy.
      std::vector<double> v(g.values().begin(), g.values().end());
      Image shifted = Image::clamped(Grid(12, 12, v));
      const auto z = logits(net, shifted);
      if (obj == 0) return -std::log(softmax(z)[2]);
      return z[3];
    };
    const Grid grad = input_gradient(net, img, objective);
    double worst = 0;
    for (int y = 1; y < 11; ++y) {
      for (int x = 1; x < 11; ++x) {
        Grid p = img.grid(), m = img.grid();
        // Stay inside [0,1] so the clamp is inactive.
        const double hh = std::min({h, img(x, y), 1 - img(x, y)}) * 0.5;
        if (hh < 1e-9) continue;
        p(x, y) += hh;
        m(x, y) -= hh;
        worst = std::max(worst, rel_err(grad(x, y), (value(p) - value(m)) / (2 * hh)));
      }
    }
    CHECK(worst <= 1e-3);
  }
}

TEST_CASE("logit jacobian rows equal per-class input gradients") {
  RandomStream rng(23);
  const Network net = mini_network(9);
  const Image img = testing::random_image(rng, 12, 12);
  const auto jac = logit_jacobian(net, img);
  CHECK(jac.logits == logits(net, img));
  for (int c = 0; c < net.class_count(); ++c) {
    const Grid g = input_gradient(net, img, LogitOfClass{c});
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(jac.gradients[static_cast<std::size_t>(c)].values()[i] == doctest::Approx(g.values()[i]).epsilon(1e-12));
    }
  }
  const auto lg = logits_and_gradient(net, img, CrossEntropyLoss{1});
  CHECK(lg.logits == jac.logits);
}

TEST_CASE("network json round trip is exact") {
  const Network net = mini_network(10);
  const Network back = network_from_json(to_json(net));
  CHECK(back == net);
  const auto path = std::filesystem::temp_directory_path() / "fitgate_net.json";
  save_network(net, path);
  CHECK(load_network(path) == net);
  std::filesystem::remove(path);
  auto j = to_json(net);
  j["layers"][0]["weights"].erase(0);
  CHECK_THROWS_AS(network_from_json(j), Error);
}

TEST_CASE("training on a tiny shape set is deterministic and learns") {
  std::vector<Image> images;
  std::vector<int> labels;
  std::uint64_t idx = 0;
  for (int k = 0; k < 40; ++k) {
    for (int c : {9, 5}) {  // checkerboard vs circle
      images.push_back(datagen::render_shape(c, derive_stream(3, idx++), 32));
      labels.push_back(c == 9 ? 0 : 1);
    }
  }
  Network arch({LayerSpec::conv(4, 5, 2), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::flatten(),
                LayerSpec::dense(2), LayerSpec::softmax()},
               TensorShape{1, 32, 32});
  TrainHyper hyper;
  hyper.epochs = 10;
  hyper.learning_rate = 0.005;
  hyper.batch_size = 8;
  std::vector<EpochRecord> seen;
  const auto a = train_classifier(images, labels, hyper, 11, arch, [&](const EpochRecord& r) { seen.push_back(r); });
  const auto b = train_classifier(images, labels, hyper, 11, arch);
  CHECK(a.net == b.net);
  CHECK(seen.size() == 10);
  CHECK(seen[1].learning_rate == 0.005);
  CHECK(seen[3].learning_rate == 0.0025);
  CHECK(a.history.back().loss < a.history.front().loss);
  CHECK(accuracy(a.net, images, labels) >= 0.9);
  CHECK_THROWS_AS(train_classifier({}, {}, hyper, 1, arch), Error);
}

TEST_CASE("training reports divergence on a non-finite loss") {
  std::vector<Image> images{Image::filled(32, 32, 1.0), Image::filled(32, 32, 0.0)};
  std::vector<int> labels{0, 1};
  Network arch({LayerSpec::flatten(), LayerSpec::dense(2), LayerSpec::softmax()}, TensorShape{1, 32, 32});
  TrainHyper hyper;
  hyper.learning_rate = 1e306;
  hyper.epochs = 50;
  try {
    train_classifier(images, labels, hyper, 1, arch);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDivergence);
  }
}
