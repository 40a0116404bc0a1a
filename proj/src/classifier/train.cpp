#include <cmath>
#include <fstream>

#include "fitgate/classifier/network.hpp"
#include "fitgate/core/error.hpp"
#include "fitgate/core/text.hpp"
#include "fitgate/simd/kernels.hpp"

namespace fitgate::classifier {

TrainResult train_classifier(std::span<const Image> images, std::span<const int> labels,
                             const TrainHyper& hyper, std::uint64_t seed,
                             const Network& initial_architecture, const EpochCallback& on_epoch) {
  if (images.empty()) fail(ErrorCode::kEmptyInput, "train_classifier: empty dataset");
  if (images.size() != labels.size()) {
    fail(ErrorCode::kDimensionMismatch, "train_classifier: images and labels differ in length");
  }
  if (hyper.batch_size < 1 || hyper.epochs < 0 || hyper.halve_every_epochs < 1 ||
      !(hyper.learning_rate > 0.0) || hyper.momentum < 0.0 || hyper.momentum >= 1.0) {
    fail(ErrorCode::kConfig, "train_classifier: invalid hyperparameters");
  }

  TrainResult result{initial_architecture, {}};
  Network& net = result.net;
  RandomStream init_rng = derive_stream(seed, 0);
  net.init_he(init_rng);

  std::vector<LayerParams> velocity = net.params();
  for (auto& v : velocity) {
    std::fill(v.weights.begin(), v.weights.end(), 0.0);
    std::fill(v.biases.begin(), v.biases.end(), 0.0);
  }
  std::vector<LayerParams> grads;
  std::vector<Image> batch_images;
  std::vector<int> batch_labels;
  const std::size_t n = images.size();
  const auto batch_size = static_cast<std::size_t>(hyper.batch_size);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const double lr = hyper.learning_rate * std::pow(0.5, epoch / hyper.halve_every_epochs);
    RandomStream shuffle_rng = derive_stream(seed, 1 + static_cast<std::uint64_t>(epoch));
    const auto order = shuffled_indices(n, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(n, start + batch_size);
      batch_images.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_images.push_back(images[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      const double loss = loss_and_gradients(net, batch_images, batch_labels, grads, &correct);
      if (!std::isfinite(loss)) {
        fail(ErrorCode::kDivergence, "train_classifier: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch starting " +
                                         std::to_string(start) + " (lr " + format_double(lr) + ")");
      }
      loss_sum += loss * static_cast<double>(end - start);

      for (std::size_t l = 0; l < grads.size(); ++l) {
        auto update = [&](std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g) {
          for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = hyper.momentum * v[i] + g[i];
            w[i] -= lr * v[i];
          }
        };
        update(net.params()[l].weights, velocity[l].weights, grads[l].weights);
        update(net.params()[l].biases, velocity[l].biases, grads[l].biases);
      }
    }
    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(n),
                    static_cast<double>(correct) / static_cast<double>(n)};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

LayerKind kind_from(const std::string& s) {
  if (s == "conv") return LayerKind::kConv;
  if (s == "relu") return LayerKind::kRelu;
  if (s == "maxpool") return LayerKind::kMaxPool;
  if (s == "flatten") return LayerKind::kFlatten;
  if (s == "dense") return LayerKind::kDense;
  if (s == "softmax") return LayerKind::kSoftmax;
  fail(ErrorCode::kFormat, "unknown layer kind '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const Network& net) {
  nlohmann::json arch = nlohmann::json::array();
  for (const auto& s : net.architecture()) {
    nlohmann::json l{{"type", kind_name(s.kind)}};
    switch (s.kind) {
      case LayerKind::kConv:
        l["out_channels"] = s.out_channels;
        l["kernel"] = s.kernel;
        l["stride"] = s.stride;
        l["pad"] = s.pad;
        break;
      case LayerKind::kMaxPool:
        l["pool"] = s.pool;
        break;
      case LayerKind::kDense:
        l["units"] = s.units;
        break;
      default:
        break;
    }
    arch.push_back(l);
  }
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& p : net.params()) layers.push_back({{"weights", p.weights}, {"biases", p.biases}});
  const TensorShape in = net.input_shape();
  return {{"input", {{"channels", in.channels}, {"height", in.height}, {"width", in.width}}},
          {"architecture", arch},
          {"class_count", net.class_count()},
          {"layers", layers}};
}

Network network_from_json(const nlohmann::json& j) {
  try {
    std::vector<LayerSpec> arch;
    for (const auto& l : j.at("architecture")) {
      LayerSpec s;
      s.kind = kind_from(l.at("type").get<std::string>());
      s.out_channels = l.value("out_channels", 0);
      s.kernel = l.value("kernel", 0);
      s.stride = l.value("stride", 1);
      s.pad = l.value("pad", 0);
      s.pool = l.value("pool", 2);
      s.units = l.value("units", 0);
      arch.push_back(s);
    }
    const auto& in = j.at("input");
    Network net(arch, TensorShape{in.at("channels").get<int>(), in.at("height").get<int>(),
                                  in.at("width").get<int>()});
    const auto& layers = j.at("layers");
    if (layers.size() != net.params().size()) fail(ErrorCode::kFormat, "network JSON: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto w = layers[l].at("weights").get<std::vector<double>>();
      auto b = layers[l].at("biases").get<std::vector<double>>();
      if (w.size() != net.params()[l].weights.size() || b.size() != net.params()[l].biases.size()) {
        fail(ErrorCode::kFormat, "network JSON: parameter shape mismatch at layer " + std::to_string(l));
      }
      net.params()[l].weights = std::move(w);
      net.params()[l].biases = std::move(b);
    }
    if (j.contains("class_count") && j.at("class_count").get<int>() != net.class_count()) {
      fail(ErrorCode::kFormat, "network JSON: class_count disagrees with architecture");
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("network JSON: ") + e.what());
  }
}

void save_network(const Network& net, const std::filesystem::path& path) {
  write_text_file(path, to_json(net).dump());
}

Network load_network(const std::filesystem::path& path) {
  try {
    return network_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "cannot parse network " + path.string() + ": " + e.what());
  }
}

}  // namespace fitgate::classifier
