#pragma once

// Internal forward/backward machinery shared by inference, attacks and
// training. Not part of the stable interface.

#include <cstdint>
#include <vector>

#include "fitgate/classifier/network.hpp"

namespace fitgate::classifier::detail {

struct Workspace {
  // acts[l] is the batch-major input of layer l; acts.back() holds logits.
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<std::uint32_t>> pool_index;
  std::vector<double> col;
};

// acts[0] must already hold `batch` inputs.
void forward_batch(const Network& net, std::size_t batch, Workspace& ws);

// Backpropagates `grad` (grad_batch x class_count, gradient w.r.t. logits).
// With shared_activations every gradient row reuses the activations of
// sample 0 (multi-seed backward through a single forward pass). Parameter
// gradients are accumulated into *param_grads when given.
void backward_batch(const Network& net, Workspace& ws, std::vector<double> grad,
                    std::size_t grad_batch, bool shared_activations,
                    std::vector<LayerParams>* param_grads, std::vector<double>* input_grad);

}  // namespace fitgate::classifier::detail
