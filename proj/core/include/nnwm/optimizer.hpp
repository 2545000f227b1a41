#pragma once

#include <cstdint>
#include <vector>

#include "nnwm/engine.hpp"
#include "nnwm/model.hpp"

namespace nnwm {

struct TrainConfig {
  int epochs = 15;
  int batch_size = 64;
  double lr_initial = 0.1;
  double lr_drop_factor = 0.2;
  std::vector<int> lr_drop_epochs{8, 12};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
  double lambda = 0.01;  // default regularizer weight for hooks built from this config

  /// Throws ConfigError on out-of-range fields or non-increasing drop epochs.
  void validate() const;
};

/// Per-parameter velocity buffers, shapes mirroring the model parameters.
struct OptimizerState {
  std::vector<TensorD> w_velocity;
  std::vector<TensorD> b_velocity;

  explicit OptimizerState(const HostModel& model);
};

/// lr_initial * lr_drop_factor^(number of drop epochs <= epoch).
double lr_schedule(int epoch, const TrainConfig& config);

/// Nesterov momentum step on one tensor:
///   g <- grad + weight_decay * w
///   v <- momentum * v - lr * g
///   w <- w + momentum * v - lr * g
/// Parameters update in double and store back as float. Throws NumericError
/// (tagged with `context`) if an update is non-finite.
void sgd_nesterov_step(TensorF& params, const TensorD& grads, TensorD& velocity, double lr,
                       double momentum, double weight_decay, const char* context);

/// Applies the step to every parameter tensor; weight decay covers conv and
/// dense weights but never biases.
void apply_sgd_step(HostModel& model, const Gradients& grads, OptimizerState& state, double lr,
                    const TrainConfig& config);

}  // namespace nnwm
