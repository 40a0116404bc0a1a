#include "fitgate/classifier/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fitgate/classifier/workspace.hpp"
#include "fitgate/core/error.hpp"
#include "fitgate/simd/kernels.hpp"

namespace fitgate::classifier {

std::vector<LayerSpec> default_architecture(int class_count) {
  return {LayerSpec::conv(8, 5, 2),  LayerSpec::relu(),    LayerSpec::maxpool(2),
          LayerSpec::conv(16, 5, 2), LayerSpec::relu(),    LayerSpec::maxpool(2),
          LayerSpec::conv(32, 3, 1), LayerSpec::relu(),    LayerSpec::maxpool(2),
          LayerSpec::flatten(),      LayerSpec::dense(128), LayerSpec::relu(),
          LayerSpec::dense(class_count), LayerSpec::softmax()};
}

Network::Network(std::vector<LayerSpec> architecture, TensorShape input)
    : arch_(std::move(architecture)) {
  if (arch_.size() < 2 || arch_.back().kind != LayerKind::kSoftmax ||
      arch_[arch_.size() - 2].kind != LayerKind::kDense) {
    fail(ErrorCode::kInvalidArgument, "architecture must end with dense -> softmax");
  }
  if (input.channels <= 0 || input.height <= 0 || input.width <= 0) {
    fail(ErrorCode::kInvalidArgument, "input shape must be positive");
  }
  // Softmax is applied outside the layer stack; it carries no shape change.
  TensorShape shape = input;
  shapes_.push_back(shape);
  for (std::size_t l = 0; l + 1 < arch_.size(); ++l) {
    const LayerSpec& s = arch_[l];
    LayerParams p;
    switch (s.kind) {
      case LayerKind::kConv: {
        if (s.out_channels <= 0 || s.kernel <= 0 || s.stride <= 0 || s.pad < 0) {
          fail(ErrorCode::kInvalidArgument, "invalid conv layer");
        }
        const int oh = (shape.height + 2 * s.pad - s.kernel) / s.stride + 1;
        const int ow = (shape.width + 2 * s.pad - s.kernel) / s.stride + 1;
        if (oh <= 0 || ow <= 0) fail(ErrorCode::kInvalidArgument, "conv output would be empty");
        p.weights.assign(static_cast<std::size_t>(s.out_channels) * shape.channels * s.kernel * s.kernel, 0.0);
        p.biases.assign(static_cast<std::size_t>(s.out_channels), 0.0);
        shape = {s.out_channels, oh, ow};
        break;
      }
      case LayerKind::kRelu:
        break;
      case LayerKind::kMaxPool:
        if (s.pool <= 0 || shape.height < s.pool || shape.width < s.pool) {
          fail(ErrorCode::kInvalidArgument, "invalid maxpool layer");
        }
        shape = {shape.channels, shape.height / s.pool, shape.width / s.pool};
        break;
      case LayerKind::kFlatten:
        shape = {static_cast<int>(shape.size()), 1, 1};
        break;
      case LayerKind::kDense:
        if (s.units <= 0) fail(ErrorCode::kInvalidArgument, "invalid dense layer");
        p.weights.assign(static_cast<std::size_t>(s.units) * shape.size(), 0.0);
        p.biases.assign(static_cast<std::size_t>(s.units), 0.0);
        shape = {s.units, 1, 1};
        break;
      case LayerKind::kSoftmax:
        fail(ErrorCode::kInvalidArgument, "softmax may only appear last");
    }
    params_.push_back(std::move(p));
    shapes_.push_back(shape);
  }
}

Network Network::make_default(int input_size, int class_count) {
  return Network(default_architecture(class_count), TensorShape{1, input_size, input_size});
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.weights.size() + p.biases.size();
  return n;
}

void Network::init_he(RandomStream& rng) {
  for (std::size_t l = 0; l < params_.size(); ++l) {
    auto& p = params_[l];
    if (p.weights.empty()) continue;
    const std::size_t fan_in = p.weights.size() / p.biases.size();
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& w : p.weights) w = rng.normal(0.0, stddev);
    std::fill(p.biases.begin(), p.biases.end(), 0.0);
  }
}

int PredictionVector::argmax() const {
  if (probs.empty()) fail(ErrorCode::kEmptyInput, "argmax of empty prediction");
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

// ---------------------------------------------------------------------------
// Layer kernels

namespace detail {

namespace {

void im2col(const double* in, const TensorShape& s, const LayerSpec& spec, int oh, int ow,
            double* col) {
  const int k = spec.kernel;
  const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < s.channels; ++c) {
    const double* plane = in + static_cast<std::size_t>(c) * s.height * s.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ohw;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * spec.stride + ky - spec.pad;
          double* dst = row + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= s.height) {
            std::fill_n(dst, ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * s.width;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * spec.stride + kx - spec.pad;
            dst[ox] = (ix >= 0 && ix < s.width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const TensorShape& s, const LayerSpec& spec, int oh, int ow,
                double* out) {
  const int k = spec.kernel;
  const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < s.channels; ++c) {
    double* plane = out + static_cast<std::size_t>(c) * s.height * s.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ohw;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * spec.stride + ky - spec.pad;
          if (iy < 0 || iy >= s.height) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * s.width;
          const double* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * spec.stride + kx - spec.pad;
            if (ix >= 0 && ix < s.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

void forward_batch(const Network& net, std::size_t batch, Workspace& ws) {
  const auto& arch = net.architecture();
  const auto& shapes = net.shapes();
  const std::size_t layers = arch.size() - 1;
  ws.acts.resize(layers + 1);
  ws.pool_index.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const LayerSpec& spec = arch[l];
    const TensorShape& in_s = shapes[l];
    const TensorShape& out_s = shapes[l + 1];
    const std::size_t in_n = in_s.size();
    const std::size_t out_n = out_s.size();
    const std::vector<double>& in = ws.acts[l];
    std::vector<double>& out = ws.acts[l + 1];
    out.resize(batch * out_n);
    const LayerParams& p = net.params()[l];

    switch (spec.kind) {
      case LayerKind::kConv: {
        const std::size_t ckk = static_cast<std::size_t>(in_s.channels) * spec.kernel * spec.kernel;
        const std::size_t ohw = static_cast<std::size_t>(out_s.height) * out_s.width;
        ws.col.resize(ckk * ohw);
        for (std::size_t b = 0; b < batch; ++b) {
          im2col(in.data() + b * in_n, in_s, spec, out_s.height, out_s.width, ws.col.data());
          double* o = out.data() + b * out_n;
          simd::GemmArgs g;
          g.m = static_cast<std::size_t>(spec.out_channels);
          g.n = ohw;
          g.k = ckk;
          g.a = p.weights.data();
          g.lda = ckk;
          g.b = ws.col.data();
          g.ldb = ohw;
          g.c = o;
          g.ldc = ohw;
          simd::gemm(g);
          for (int oc = 0; oc < spec.out_channels; ++oc) {
            const double bias = p.biases[static_cast<std::size_t>(oc)];
            double* row = o + static_cast<std::size_t>(oc) * ohw;
            for (std::size_t i = 0; i < ohw; ++i) row[i] += bias;
          }
        }
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < batch * in_n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
        break;
      case LayerKind::kMaxPool: {
        auto& idx = ws.pool_index[l];
        idx.resize(batch * out_n);
        const int w = spec.pool;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* src = in.data() + b * in_n;
          double* dst = out.data() + b * out_n;
          std::uint32_t* di = idx.data() + b * out_n;
          for (int c = 0; c < out_s.channels; ++c) {
            for (int oy = 0; oy < out_s.height; ++oy) {
              for (int ox = 0; ox < out_s.width; ++ox) {
                std::uint32_t best = 0;
                double best_v = -std::numeric_limits<double>::infinity();
                for (int dy = 0; dy < w; ++dy) {
                  for (int dx = 0; dx < w; ++dx) {
                    const auto pos = static_cast<std::uint32_t>(
                        (static_cast<std::size_t>(c) * in_s.height + oy * w + dy) * in_s.width + ox * w + dx);
                    if (src[pos] > best_v) {
                      best_v = src[pos];
                      best = pos;
                    }
                  }
                }
                const std::size_t o = (static_cast<std::size_t>(c) * out_s.height + oy) * out_s.width + ox;
                dst[o] = best_v;
                di[o] = best;
              }
            }
          }
        }
        break;
      }
      case LayerKind::kFlatten:
        std::copy(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(batch * in_n), out.begin());
        break;
      case LayerKind::kDense: {
        simd::GemmArgs g;
        g.m = batch;
        g.n = out_n;
        g.k = in_n;
        g.a = in.data();
        g.lda = in_n;
        g.b = p.weights.data();
        g.ldb = in_n;
        g.trans_b = true;
        g.c = out.data();
        g.ldc = out_n;
        simd::gemm(g);
        for (std::size_t b = 0; b < batch; ++b) {
          double* row = out.data() + b * out_n;
          for (std::size_t j = 0; j < out_n; ++j) row[j] += p.biases[j];
        }
        break;
      }
      case LayerKind::kSoftmax:
        break;
    }
  }
}

void backward_batch(const Network& net, Workspace& ws, std::vector<double> grad,
                    std::size_t grad_batch, bool shared_activations,
                    std::vector<LayerParams>* param_grads, std::vector<double>* input_grad) {
  const auto& arch = net.architecture();
  const auto& shapes = net.shapes();
  const std::size_t layers = arch.size() - 1;
  std::vector<double> next;

  for (std::size_t l = layers; l-- > 0;) {
    const LayerSpec& spec = arch[l];
    const TensorShape& in_s = shapes[l];
    const TensorShape& out_s = shapes[l + 1];
    const std::size_t in_n = in_s.size();
    const std::size_t out_n = out_s.size();
    const std::vector<double>& in = ws.acts[l];
    const LayerParams& p = net.params()[l];
    LayerParams* pg = param_grads ? &(*param_grads)[l] : nullptr;
    const bool need_input = l > 0 || input_grad != nullptr;
    auto act_offset = [&](std::size_t g) { return (shared_activations ? 0 : g) * in_n; };

    switch (spec.kind) {
      case LayerKind::kConv: {
        const std::size_t ckk = static_cast<std::size_t>(in_s.channels) * spec.kernel * spec.kernel;
        const std::size_t ohw = static_cast<std::size_t>(out_s.height) * out_s.width;
        ws.col.resize(ckk * ohw);
        if (need_input) next.assign(grad_batch * in_n, 0.0);
        for (std::size_t g = 0; g < grad_batch; ++g) {
          const double* dout = grad.data() + g * out_n;
          if (pg) {
            im2col(in.data() + act_offset(g), in_s, spec, out_s.height, out_s.width, ws.col.data());
            simd::GemmArgs gw;
            gw.m = static_cast<std::size_t>(spec.out_channels);
            gw.n = ckk;
            gw.k = ohw;
            gw.a = dout;
            gw.lda = ohw;
            gw.b = ws.col.data();
            gw.ldb = ohw;
            gw.trans_b = true;
            gw.c = pg->weights.data();
            gw.ldc = ckk;
            gw.accumulate = true;
            simd::gemm(gw);
            for (int oc = 0; oc < spec.out_channels; ++oc) {
              const double* row = dout + static_cast<std::size_t>(oc) * ohw;
              double s = 0.0;
              for (std::size_t i = 0; i < ohw; ++i) s += row[i];
              pg->biases[static_cast<std::size_t>(oc)] += s;
            }
          }
          if (need_input) {
            simd::GemmArgs gi;
            gi.m = ckk;
            gi.n = ohw;
            gi.k = static_cast<std::size_t>(spec.out_channels);
            gi.a = p.weights.data();
            gi.lda = ckk;
            gi.trans_a = true;
            gi.b = dout;
            gi.ldb = ohw;
            gi.c = ws.col.data();
            gi.ldc = ohw;
            simd::gemm(gi);
            col2im_add(ws.col.data(), in_s, spec, out_s.height, out_s.width, next.data() + g * in_n);
          }
        }
        break;
      }
      case LayerKind::kRelu:
        next.resize(grad_batch * in_n);
        for (std::size_t g = 0; g < grad_batch; ++g) {
          const double* a = in.data() + act_offset(g);
          const double* d = grad.data() + g * in_n;
          double* o = next.data() + g * in_n;
          for (std::size_t i = 0; i < in_n; ++i) o[i] = a[i] > 0.0 ? d[i] : 0.0;
        }
        break;
      case LayerKind::kMaxPool: {
        const auto& idx = ws.pool_index[l];
        next.assign(grad_batch * in_n, 0.0);
        for (std::size_t g = 0; g < grad_batch; ++g) {
          const std::uint32_t* di = idx.data() + (shared_activations ? 0 : g) * out_n;
          const double* d = grad.data() + g * out_n;
          double* o = next.data() + g * in_n;
          for (std::size_t i = 0; i < out_n; ++i) o[di[i]] += d[i];
        }
        break;
      }
      case LayerKind::kFlatten:
        next = grad;
        break;
      case LayerKind::kDense: {
        if (pg) {
          if (shared_activations && grad_batch > 1) {
            fail(ErrorCode::kInvalidArgument, "parameter gradients need per-sample activations");
          }
          simd::GemmArgs gw;
          gw.m = out_n;
          gw.n = in_n;
          gw.k = grad_batch;
          gw.a = grad.data();
          gw.lda = out_n;
          gw.trans_a = true;
          gw.b = in.data();
          gw.ldb = in_n;
          gw.c = pg->weights.data();
          gw.ldc = in_n;
          gw.accumulate = true;
          simd::gemm(gw);
          for (std::size_t g = 0; g < grad_batch; ++g) {
            for (std::size_t j = 0; j < out_n; ++j) pg->biases[j] += grad[g * out_n + j];
          }
        }
        if (need_input) {
          next.resize(grad_batch * in_n);
          simd::GemmArgs gi;
          gi.m = grad_batch;
          gi.n = in_n;
          gi.k = out_n;
          gi.a = grad.data();
          gi.lda = out_n;
          gi.b = p.weights.data();
          gi.ldb = in_n;
          gi.c = next.data();
          gi.ldc = in_n;
          simd::gemm(gi);
        }
        break;
      }
      case LayerKind::kSoftmax:
        break;
    }
    if (!need_input) return;
    grad.swap(next);
  }
  if (input_grad) *input_grad = std::move(grad);
}

}  // namespace detail

// ---------------------------------------------------------------------------

namespace {

void load_input(const Network& net, const Image& image, detail::Workspace& ws) {
  const TensorShape s = net.input_shape();
  if (s.channels != 1 || image.width() != s.width || image.height() != s.height) {
    fail(ErrorCode::kDimensionMismatch, "image is " + std::to_string(image.width()) + "x" +
                                            std::to_string(image.height()) + ", network expects " +
                                            std::to_string(s.width) + "x" + std::to_string(s.height));
  }
  ws.acts.resize(1);
  ws.acts[0].assign(image.values().begin(), image.values().end());
}

detail::Workspace& scratch() {
  thread_local detail::Workspace ws;
  return ws;
}

}  // namespace

std::vector<double> logits(const Network& net, const Image& image) {
  auto& ws = scratch();
  load_input(net, image, ws);
  detail::forward_batch(net, 1, ws);
  return ws.acts.back();
}

PredictionVector forward(const Network& net, const Image& image) {
  return PredictionVector{softmax(logits(net, image))};
}

Grid input_gradient(const Network& net, const Image& image, const Objective& objective) {
  return logits_and_gradient(net, image, objective).gradient;
}

LogitsAndGradient logits_and_gradient(const Network& net, const Image& image, const Objective& objective) {
  auto& ws = scratch();
  load_input(net, image, ws);
  detail::forward_batch(net, 1, ws);
  const int classes = net.class_count();
  std::vector<double> seed(static_cast<std::size_t>(classes), 0.0);
  if (const auto* ce = std::get_if<CrossEntropyLoss>(&objective)) {
    if (ce->label < 0 || ce->label >= classes) fail(ErrorCode::kInvalidArgument, "label out of range");
    seed = softmax(ws.acts.back());
    seed[static_cast<std::size_t>(ce->label)] -= 1.0;
  } else {
    const int t = std::get<LogitOfClass>(objective).class_id;
    if (t < 0 || t >= classes) fail(ErrorCode::kInvalidArgument, "class index out of range");
    seed[static_cast<std::size_t>(t)] = 1.0;
  }
  LogitsAndGradient out;
  out.logits = ws.acts.back();
  std::vector<double> grad;
  detail::backward_batch(net, ws, std::move(seed), 1, true, nullptr, &grad);
  out.gradient = Grid(image.width(), image.height(), std::move(grad));
  return out;
}

LogitJacobian logit_jacobian(const Network& net, const Image& image) {
  auto& ws = scratch();
  load_input(net, image, ws);
  detail::forward_batch(net, 1, ws);
  const auto classes = static_cast<std::size_t>(net.class_count());
  LogitJacobian jac;
  jac.logits = ws.acts.back();
  std::vector<double> seeds(classes * classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) seeds[c * classes + c] = 1.0;
  std::vector<double> grad;
  detail::backward_batch(net, ws, std::move(seeds), classes, true, nullptr, &grad);
  const std::size_t n = image.size();
  jac.gradients.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    jac.gradients.emplace_back(image.width(), image.height(),
                               std::vector<double>(grad.begin() + static_cast<std::ptrdiff_t>(c * n),
                                                   grad.begin() + static_cast<std::ptrdiff_t>((c + 1) * n)));
  }
  return jac;
}

double loss_and_gradients(const Network& net, std::span<const Image> images,
                          std::span<const int> labels, std::vector<LayerParams>& gradients,
                          std::size_t* correct) {
  if (images.empty() || images.size() != labels.size()) {
    fail(ErrorCode::kInvalidArgument, "loss_and_gradients: need matching non-empty batch");
  }
  const std::size_t batch = images.size();
  const std::size_t in_n = net.input_shape().size();
  auto& ws = scratch();
  ws.acts.resize(1);
  ws.acts[0].resize(batch * in_n);
  for (std::size_t b = 0; b < batch; ++b) {
    const Image& img = images[b];
    if (img.size() != in_n || img.width() != net.input_shape().width) {
      fail(ErrorCode::kDimensionMismatch, "batch image does not match network input");
    }
    std::copy(img.values().begin(), img.values().end(), ws.acts[0].begin() + static_cast<std::ptrdiff_t>(b * in_n));
  }
  detail::forward_batch(net, batch, ws);
  const auto classes = static_cast<std::size_t>(net.class_count());
  std::vector<double> grad(batch * classes);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto probs = softmax(std::span<const double>(ws.acts.back()).subspan(b * classes, classes));
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) fail(ErrorCode::kInvalidArgument, "label out of range");
    loss -= std::log(std::max(probs[static_cast<std::size_t>(y)], 1e-300));
    if (correct && static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()) == y) ++*correct;
    for (std::size_t c = 0; c < classes; ++c) {
      grad[b * classes + c] = (probs[c] - (static_cast<int>(c) == y ? 1.0 : 0.0)) / static_cast<double>(batch);
    }
  }
  gradients.resize(net.params().size());
  for (std::size_t l = 0; l < gradients.size(); ++l) {
    gradients[l].weights.assign(net.params()[l].weights.size(), 0.0);
    gradients[l].biases.assign(net.params()[l].biases.size(), 0.0);
  }
  detail::backward_batch(net, ws, std::move(grad), batch, false, &gradients, nullptr);
  return loss / static_cast<double>(batch);
}

std::vector<std::pair<int, double>> top_k(const PredictionVector& pred, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > pred.probs.size()) {
    fail(ErrorCode::kInvalidArgument, "top_k: k out of range");
  }
  std::vector<int> order(pred.probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return pred.probs[static_cast<std::size_t>(a)] > pred.probs[static_cast<std::size_t>(b)];
  });
  std::vector<std::pair<int, double>> out;
  for (int i = 0; i < k; ++i) out.emplace_back(order[static_cast<std::size_t>(i)], pred.probs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  return out;
}

double accuracy(const Network& net, std::span<const Image> images, std::span<const int> labels) {
  if (images.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (forward(net, images[i]).argmax() == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

}  // namespace fitgate::classifier
