#include "nnwm/optimizer.hpp"

#include <cmath>
#include <string>

#include "nnwm/error.hpp"

namespace nnwm {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (lr_initial <= 0.0) throw ConfigError("initial learning rate must be > 0");
  if (lr_drop_factor <= 0.0 || lr_drop_factor > 1.0) {
    throw ConfigError("lr drop factor must be in (0, 1]");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  for (std::size_t i = 0; i < lr_drop_epochs.size(); ++i) {
    if (lr_drop_epochs[i] >= epochs) {
      throw ConfigError("lr drop epoch " + std::to_string(lr_drop_epochs[i]) +
                        " is not before the last epoch");
    }
    if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1]) {
      throw ConfigError("lr drop epochs must be strictly increasing");
    }
  }
}

OptimizerState::OptimizerState(const HostModel& model) {
  w_velocity.reserve(model.layers.size());
  b_velocity.reserve(model.layers.size());
  for (const Layer& layer : model.layers) {
    w_velocity.emplace_back(layer.has_params() ? TensorD(layer.weights.shape()) : TensorD());
    b_velocity.emplace_back(layer.has_params() ? TensorD(layer.bias.shape()) : TensorD());
  }
}

double lr_schedule(int epoch, const TrainConfig& config) {
  int drops = 0;
  for (int d : config.lr_drop_epochs) {
    if (d <= epoch) ++drops;
  }
  return config.lr_initial * std::pow(config.lr_drop_factor, drops);
}

void sgd_nesterov_step(TensorF& params, const TensorD& grads, TensorD& velocity, double lr,
                       double momentum, double weight_decay, const char* context) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double w = static_cast<double>(params[i]);
    const double g = grads[i] + weight_decay * w;
    const double v = momentum * velocity[i] - lr * g;
    velocity[i] = v;
    const double next = w + momentum * v - lr * g;
    if (!std::isfinite(next)) {
      throw NumericError(std::string("non-finite parameter update in ") + context);
    }
    params[i] = static_cast<float>(next);
  }
}

void apply_sgd_step(HostModel& model, const Gradients& grads, OptimizerState& state, double lr,
                    const TrainConfig& config) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& layer = model.layers[i];
    if (!layer.has_params()) continue;
    sgd_nesterov_step(layer.weights, grads.weights[i], state.w_velocity[i], lr, config.momentum,
                      config.weight_decay, layer.spec.name.c_str());
    sgd_nesterov_step(layer.bias, grads.bias[i], state.b_velocity[i], lr, config.momentum, 0.0,
                      layer.spec.name.c_str());
  }
}

}  // namespace nnwm
