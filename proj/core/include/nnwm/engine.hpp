#pragma once

#include <variant>
#include <vector>

#include "nnwm/loss.hpp"
#include "nnwm/model.hpp"
#include "nnwm/tensor.hpp"

namespace nnwm {

/// Number of worker threads for batch-level data parallelism. 1 (the
/// default) is the deterministic mode all reproducibility guarantees assume;
/// higher values trade bitwise reproducibility for speed.
void set_num_threads(int n);
int num_threads();

/// Activations recorded during a forward pass; outputs[i] is layer i's
/// output, pool_argmax[i] holds max_pool winner offsets.
struct ForwardTrace {
  std::vector<TensorD> outputs;
  std::vector<std::vector<int>> pool_argmax;
};

/// Runs the stack on a (batch, C, H, W) input and returns the logits.
TensorD forward(const HostModel& model, const TensorD& batch);

/// Forward pass that keeps every intermediate activation.
ForwardTrace forward_trace(const HostModel& model, const TensorD& batch);

/// Per-layer parameter gradients; tensors are empty for layers without
/// parameters. Shapes mirror the model's weights/biases (in double).
struct Gradients {
  std::vector<TensorD> weights;
  std::vector<TensorD> bias;

  static Gradients zeros_like(const HostModel& model);
  void add_scaled(const Gradients& other, double scale);
};

/// Hard labels or per-sample target distributions.
using Targets = std::variant<std::vector<int>, TensorD>;

struct BackwardResult {
  double loss = 0.0;
  TensorD logits;
  Gradients grads;
};

/// Forward + loss + reverse pass in one call. Weight decay is not applied
/// here; the optimizer adds it.
BackwardResult backprop(const HostModel& model, const TensorD& batch, const Targets& targets);

/// Parameter gradients only (convenience over backprop).
Gradients backward(const HostModel& model, const TensorD& batch, const std::vector<int>& labels);
Gradients backward(const HostModel& model, const TensorD& batch, const TensorD& soft_targets);

}  // namespace nnwm
