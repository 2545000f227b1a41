#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nnwm/layers.hpp"

namespace nnwm {

/// A feed-forward image classifier: an ordered layer stack plus metadata
/// naming the convolution layer that carries the watermark (if any).
struct HostModel {
  std::vector<Layer> layers;
  std::array<int, 3> input_shape{0, 0, 0};  // (C, H, W)
  int num_classes = 0;
  std::string embed_layer_id;  // empty when nothing is embedded

  /// Index of the layer with the given name; -1 if absent.
  int find_layer(const std::string& name) const;

  /// Throws ConfigError unless consecutive shapes are compatible, parameter
  /// tensors match their specs, all values are finite, and embed_layer_id
  /// (when set) names a conv2d layer.
  void validate() const;

  /// Shapes of every layer output, input first excluded. Computed from
  /// input_shape; validates compatibility along the way.
  std::vector<std::vector<int>> output_shapes() const;
};

/// Options for the stock desk-scale host: one 3x3 conv + relu per group,
/// 2x2 max-pool between groups, global average pooling and a dense head.
/// With `residual`, groups whose width equals their input depth get a skip
/// connection (conv -> add input -> relu).
struct MiniCnnOptions {
  std::array<int, 3> input_shape{3, 16, 16};
  int num_classes = 4;
  std::vector<int> group_widths{16, 32, 64, 64};
  bool residual = false;
};

/// Builds the group-structured host; layers are named conv1..convN, with the
/// final stack gap + fc. Parameters are zero until init_parameters.
HostModel make_mini_cnn(const MiniCnnOptions& opts);

/// He fan-in normal initialization for conv/dense weights, zero biases.
/// Draws come from SplitMix64(derive_stream(seed, kStreamInit)), layer by
/// layer in stack order, weights in their row-major layout order.
void init_parameters(HostModel& model, std::uint64_t seed);

}  // namespace nnwm
