#pragma once

#include <vector>

#include "nnwm/tensor.hpp"

namespace nnwm {

struct LossResult {
  double value = 0.0;
  TensorD dlogits;  // gradient wrt logits, already divided by batch size
};

/// Row-wise softmax of a (batch, classes) tensor.
TensorD softmax_rows(const TensorD& logits);

/// Mean over the batch of -log softmax(logits)[label].
/// Throws NumericError on non-finite logits, ConfigError on bad labels.
LossResult cross_entropy_loss(const TensorD& logits, const std::vector<int>& labels);

/// Cross entropy between fixed teacher distributions and the row softmax of
/// `logits`, averaged over the batch. Rows of `teacher_probs` must sum to 1
/// within 1e-5 (DataError otherwise).
LossResult soft_target_loss(const TensorD& logits, const TensorD& teacher_probs);

}  // namespace nnwm
