#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fitgate/core/image.hpp"
#include "fitgate/core/random.hpp"
#include "json.hpp"

namespace fitgate::classifier {

enum class LayerKind { kConv, kRelu, kMaxPool, kFlatten, kDense, kSoftmax };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int out_channels = 0;  // conv
  int kernel = 0;        // conv
  int stride = 1;        // conv
  int pad = 0;           // conv
  int pool = 2;          // maxpool window == stride
  int units = 0;         // dense

  static LayerSpec conv(int out_channels, int kernel, int pad, int stride = 1) {
    return {LayerKind::kConv, out_channels, kernel, stride, pad, 2, 0};
  }
  static LayerSpec relu() { return {LayerKind::kRelu}; }
  static LayerSpec maxpool(int window = 2) { return {LayerKind::kMaxPool, 0, 0, 1, 0, window, 0}; }
  static LayerSpec flatten() { return {LayerKind::kFlatten}; }
  static LayerSpec dense(int units) { return {LayerKind::kDense, 0, 0, 1, 0, 2, units}; }
  static LayerSpec softmax() { return {LayerKind::kSoftmax}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct TensorShape {
  int channels = 1;
  int height = 1;
  int width = 1;
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

// conv 5x5x8 -> relu -> pool -> conv 5x5x16 -> relu -> pool -> conv 3x3x32 ->
// relu -> pool -> flatten -> dense 128 -> relu -> dense classes -> softmax.
std::vector<LayerSpec> default_architecture(int class_count = 10);

// Per-layer trainable parameters; parameter-free layers hold empty vectors.
struct LayerParams {
  std::vector<double> weights;  // conv: [out][in][k][k]; dense: [out][in]
  std::vector<double> biases;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

class Network {
 public:
  // All parameters zero. The last layer must be softmax, preceded by a dense
  // layer with class_count units.
  Network(std::vector<LayerSpec> architecture, TensorShape input);

  static Network make_default(int input_size = 64, int class_count = 10);

  const std::vector<LayerSpec>& architecture() const noexcept { return arch_; }
  TensorShape input_shape() const noexcept { return shapes_.front(); }
  // Input shape of layer l; shapes()[layers] is the output (logit) shape.
  const std::vector<TensorShape>& shapes() const noexcept { return shapes_; }
  int class_count() const noexcept { return static_cast<int>(shapes_.back().size()); }

  std::vector<LayerParams>& params() noexcept { return params_; }
  const std::vector<LayerParams>& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept;

  // He initialisation: weights ~ Normal(0, sqrt(2 / fan_in)) drawn layer by
  // layer in storage order, biases zero.
  void init_he(RandomStream& rng);

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<LayerSpec> arch_;
  std::vector<TensorShape> shapes_;
  std::vector<LayerParams> params_;
};

struct PredictionVector {
  std::vector<double> probs;

  int argmax() const;
  std::size_t size() const noexcept { return probs.size(); }
};

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

std::vector<double> logits(const Network& net, const Image& image);
// Throws kDimensionMismatch when the image does not match the input shape.
PredictionVector forward(const Network& net, const Image& image);

// Objectives for input_gradient.
struct CrossEntropyLoss {
  int label = 0;
};
struct LogitOfClass {
  int class_id = 0;
};
using Objective = std::variant<CrossEntropyLoss, LogitOfClass>;

// Exact backpropagated gradient of the objective with respect to each pixel.
Grid input_gradient(const Network& net, const Image& image, const Objective& objective);

// Logits at the image together with the objective's input gradient, from a
// single forward pass.
struct LogitsAndGradient {
  std::vector<double> logits;
  Grid gradient;
};
LogitsAndGradient logits_and_gradient(const Network& net, const Image& image, const Objective& objective);

// Logits and the gradient of every logit with respect to the input, computed
// in one multi-seed backward pass.
struct LogitJacobian {
  std::vector<double> logits;
  std::vector<Grid> gradients;  // one per class
};
LogitJacobian logit_jacobian(const Network& net, const Image& image);

// Mean cross-entropy over the batch and its gradient with respect to every
// parameter (same layout as Network::params()). When `correct` is given it
// receives the number of samples whose argmax matched the label.
double loss_and_gradients(const Network& net, std::span<const Image> images,
                          std::span<const int> labels, std::vector<LayerParams>& gradients,
                          std::size_t* correct = nullptr);

// Descending by probability; ties broken by lower class id.
std::vector<std::pair<int, double>> top_k(const PredictionVector& pred, int k);

// Serialisation: {"input":{channels,height,width}, "architecture":[...],
// "class_count":n, "layers":[{"weights":[...],"biases":[...]}...]}.
nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

struct TrainHyper {
  double learning_rate = 0.05;
  int halve_every_epochs = 3;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 10;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;      // mean training cross-entropy
  double accuracy = 0.0;  // training accuracy measured during the epoch
};

struct TrainResult {
  Network net;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// SGD with momentum on mean cross-entropy. Parameters come from
// derive_stream(seed, 0); epoch e shuffles with derive_stream(seed, 1 + e).
// Throws kEmptyInput on no data and kDivergence on a non-finite loss.
TrainResult train_classifier(std::span<const Image> images, std::span<const int> labels,
                             const TrainHyper& hyper, std::uint64_t seed,
                             const Network& initial_architecture,
                             const EpochCallback& on_epoch = {});

double accuracy(const Network& net, std::span<const Image> images, std::span<const int> labels);

}  // namespace fitgate::classifier
