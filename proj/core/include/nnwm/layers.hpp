#pragma once

#include <string>
#include <vector>

#include "nnwm/tensor.hpp"

namespace nnwm {

/// Layer kinds. The numeric values are the on-disk kind tags; never renumber.
enum class LayerKind : int {
  conv2d = 0,
  dense = 1,
  relu = 2,
  max_pool = 3,
  global_avg_pool = 4,
  flatten = 5,
  residual_add = 6,
};

const char* layer_kind_name(LayerKind k);

/// Static description of one layer. Only the fields for the given kind are
/// meaningful:
///   conv2d:       filter_size (odd S), in_depth D, filters L.
///                 Stride 1, zero padding (S-1)/2; spatial size is preserved.
///   dense:        in_features, out_features.
///   max_pool:     pool_h, pool_w. Stride equals the window; input must tile.
///   residual_add: residual_source, index of an earlier layer whose output is
///                 added to the incoming activation.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  int filter_size = 0;
  int in_depth = 0;
  int filters = 0;
  int in_features = 0;
  int out_features = 0;
  int pool_h = 0;
  int pool_w = 0;
  int residual_source = -1;
};

/// Layer = spec + parameters. Weight layout:
///   conv2d: shape (S, S, D, L), row-major (filter row, filter col, input
///           channel, filter index); bias has length L.
///   dense:  shape (in, out); bias has length out.
/// Other kinds carry no parameters. Biases are never watermarked.
struct Layer {
  LayerSpec spec;
  TensorF weights;
  TensorF bias;

  bool has_params() const {
    return spec.kind == LayerKind::conv2d || spec.kind == LayerKind::dense;
  }
};

/// Output shape of a layer given its input shape, (C,H,W) or (F).
/// `earlier_outputs` supplies the shapes of all preceding layer outputs so
/// residual_add can check its source. Throws ConfigError on mismatch.
std::vector<int> layer_output_shape(const LayerSpec& spec,
                                    const std::vector<int>& input,
                                    const std::vector<std::vector<int>>& earlier_outputs);

}  // namespace nnwm
