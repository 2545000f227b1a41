#include "nnwm/model.hpp"

#include <cmath>

#include "nnwm/error.hpp"
#include "nnwm/rng.hpp"

namespace nnwm {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::residual_add: return "residual_add";
  }
  return "?";
}

std::vector<int> layer_output_shape(const LayerSpec& spec,
                                    const std::vector<int>& input,
                                    const std::vector<std::vector<int>>& earlier_outputs) {
  auto need_chw = [&](const char* what) {
    if (input.size() != 3) {
      throw ConfigError(std::string(what) + " layer '" + spec.name +
                        "' expects a (C,H,W) input");
    }
  };
  switch (spec.kind) {
    case LayerKind::conv2d: {
      need_chw("conv2d");
      if (spec.filter_size < 1 || spec.filter_size % 2 == 0) {
        throw ConfigError("conv2d '" + spec.name + "': filter size must be odd and >= 1");
      }
      if (input[0] != spec.in_depth) {
        throw ConfigError("conv2d '" + spec.name + "': input depth " +
                          std::to_string(input[0]) + " != expected " +
                          std::to_string(spec.in_depth));
      }
      return {spec.filters, input[1], input[2]};
    }
    case LayerKind::dense: {
      if (input.size() != 1 || input[0] != spec.in_features) {
        throw ConfigError("dense '" + spec.name + "': expects a flat input of " +
                          std::to_string(spec.in_features) + " features");
      }
      return {spec.out_features};
    }
    case LayerKind::relu:
      return input;
    case LayerKind::max_pool: {
      need_chw("max_pool");
      if (spec.pool_h < 1 || spec.pool_w < 1 || input[1] % spec.pool_h != 0 ||
          input[2] % spec.pool_w != 0) {
        throw ConfigError("max_pool '" + spec.name + "': window must tile the input");
      }
      return {input[0], input[1] / spec.pool_h, input[2] / spec.pool_w};
    }
    case LayerKind::global_avg_pool:
      need_chw("global_avg_pool");
      return {input[0]};
    case LayerKind::flatten:
      need_chw("flatten");
      return {input[0] * input[1] * input[2]};
    case LayerKind::residual_add: {
      if (spec.residual_source < 0 ||
          spec.residual_source >= static_cast<int>(earlier_outputs.size())) {
        throw ConfigError("residual_add '" + spec.name + "': source index out of range");
      }
      if (earlier_outputs[static_cast<std::size_t>(spec.residual_source)] != input) {
        throw ConfigError("residual_add '" + spec.name + "': source shape mismatch");
      }
      return input;
    }
  }
  throw ConfigError("unknown layer kind");
}

int HostModel::find_layer(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].spec.name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::vector<int>> HostModel::output_shapes() const {
  std::vector<std::vector<int>> shapes;
  shapes.reserve(layers.size());
  std::vector<int> cur{input_shape[0], input_shape[1], input_shape[2]};
  for (const Layer& layer : layers) {
    cur = layer_output_shape(layer.spec, cur, shapes);
    shapes.push_back(cur);
  }
  return shapes;
}

void HostModel::validate() const {
  if (input_shape[0] < 1 || input_shape[1] < 1 || input_shape[2] < 1) {
    throw ConfigError("model input shape must be positive");
  }
  if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
  const auto shapes = output_shapes();
  if (shapes.empty() || shapes.back() != std::vector<int>{num_classes}) {
    throw ConfigError("model must end in a flat vector of num_classes logits");
  }
  for (const Layer& layer : layers) {
    const LayerSpec& s = layer.spec;
    if (s.kind == LayerKind::conv2d) {
      const std::vector<int> want{s.filter_size, s.filter_size, s.in_depth, s.filters};
      if (layer.weights.shape() != want || layer.bias.shape() != std::vector<int>{s.filters}) {
        throw ConfigError("conv2d '" + s.name + "': parameter shape mismatch");
      }
    } else if (s.kind == LayerKind::dense) {
      const std::vector<int> want{s.in_features, s.out_features};
      if (layer.weights.shape() != want ||
          layer.bias.shape() != std::vector<int>{s.out_features}) {
        throw ConfigError("dense '" + s.name + "': parameter shape mismatch");
      }
    } else if (!layer.weights.empty() || !layer.bias.empty()) {
      throw ConfigError("layer '" + s.name + "' must not carry parameters");
    }
    if (!layer.weights.all_finite() || !layer.bias.all_finite()) {
      throw ConfigError("layer '" + s.name + "' has non-finite parameters");
    }
  }
  if (!embed_layer_id.empty()) {
    const int idx = find_layer(embed_layer_id);
    if (idx < 0 || layers[static_cast<std::size_t>(idx)].spec.kind != LayerKind::conv2d) {
      throw ConfigError("embed layer '" + embed_layer_id + "' must name a conv2d layer");
    }
  }
}

HostModel make_mini_cnn(const MiniCnnOptions& opts) {
  if (opts.group_widths.empty()) throw ConfigError("mini cnn needs at least one group");
  HostModel m;
  m.input_shape = opts.input_shape;
  m.num_classes = opts.num_classes;

  int depth = opts.input_shape[0];
  int h = opts.input_shape[1];
  int w = opts.input_shape[2];
  const int groups = static_cast<int>(opts.group_widths.size());
  for (int g = 0; g < groups; ++g) {
    const int width = opts.group_widths[static_cast<std::size_t>(g)];
    const std::string tag = std::to_string(g + 1);
    const int group_input = static_cast<int>(m.layers.size()) - 1;

    Layer conv;
    conv.spec.name = "conv" + tag;
    conv.spec.kind = LayerKind::conv2d;
    conv.spec.filter_size = 3;
    conv.spec.in_depth = depth;
    conv.spec.filters = width;
    conv.weights = TensorF({3, 3, depth, width});
    conv.bias = TensorF({width});
    m.layers.push_back(std::move(conv));

    if (opts.residual && width == depth && group_input >= 0) {
      Layer add;
      add.spec.name = "add" + tag;
      add.spec.kind = LayerKind::residual_add;
      add.spec.residual_source = group_input;
      m.layers.push_back(std::move(add));
    }

    Layer act;
    act.spec.name = "relu" + tag;
    act.spec.kind = LayerKind::relu;
    m.layers.push_back(std::move(act));

    depth = width;
    if (g + 1 < groups) {
      if (h % 2 != 0 || w % 2 != 0) {
        throw ConfigError("mini cnn: spatial size must stay divisible by 2 between groups");
      }
      Layer pool;
      pool.spec.name = "pool" + tag;
      pool.spec.kind = LayerKind::max_pool;
      pool.spec.pool_h = 2;
      pool.spec.pool_w = 2;
      m.layers.push_back(std::move(pool));
      h /= 2;
      w /= 2;
    }
  }

  Layer gap;
  gap.spec.name = "gap";
  gap.spec.kind = LayerKind::global_avg_pool;
  m.layers.push_back(std::move(gap));

  Layer fc;
  fc.spec.name = "fc";
  fc.spec.kind = LayerKind::dense;
  fc.spec.in_features = depth;
  fc.spec.out_features = opts.num_classes;
  fc.weights = TensorF({depth, opts.num_classes});
  fc.bias = TensorF({opts.num_classes});
  m.layers.push_back(std::move(fc));

  m.validate();
  return m;
}

void init_parameters(HostModel& model, std::uint64_t seed) {
  SplitMix64 rng(derive_stream(seed, kStreamInit));
  for (Layer& layer : model.layers) {
    if (!layer.has_params()) continue;
    const int fan_in = layer.spec.kind == LayerKind::conv2d
                           ? layer.spec.filter_size * layer.spec.filter_size * layer.spec.in_depth
                           : layer.spec.in_features;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (float& v : layer.weights.values()) {
      v = static_cast<float>(stddev * rng.next_normal());
    }
    layer.bias.fill(0.0f);
  }
}

}  // namespace nnwm
