#pragma once

#include <span>
#include <string>
#include <vector>

#include "nnwm/data.hpp"
#include "nnwm/model.hpp"
#include "nnwm/optimizer.hpp"
#include "nnwm/watermark.hpp"

namespace nnwm {

/// Adds lambda * E_R(key, mean(target layer), bits) to the training
/// objective. The key is fixed; only the layer's weights move.
struct RegularizerHook {
  KeyMatrix key;
  WatermarkBits bits;
  std::string layer;
  double lambda = 0.01;
};

/// One logged step: epoch index (or sweep coordinate) plus losses, test
/// error and bit error rate. e_r and ber are 0 when no hook is active.
struct RecordRow {
  double step = 0.0;
  double e0 = 0.0;
  double e_r = 0.0;
  double total = 0.0;
  double test_error = 0.0;
  double ber = 0.0;
};

struct ExperimentRecord {
  std::vector<RecordRow> rows;
};

/// Minibatch SGD on E0 + sum_h lambda_h * E_R_h. E0 per row is the mean task
/// loss over the epoch's batches; E_R, test error and BER are measured at
/// the end of each epoch (BER against the first hook's payload). With a
/// fixed seed and one thread the resulting parameters are bit-identical
/// across runs. Throws NumericError naming the epoch on divergence.
ExperimentRecord train(HostModel& model, const Dataset& train_data, const Dataset& test_data,
                       const TrainConfig& config, std::span<const RegularizerHook> hooks = {});

/// Same loop with fixed per-sample target distributions (N, num_classes)
/// instead of the dataset labels; used for distillation.
ExperimentRecord train_soft(HostModel& model, const Dataset& train_data,
                            const TensorD& soft_targets, const Dataset& test_data,
                            const TrainConfig& config,
                            std::span<const RegularizerHook> hooks = {});

/// Fraction of argmax-misclassified samples; argmax ties go to the lowest
/// class index.
double evaluate(const HostModel& model, const Dataset& data);

/// Row softmax of the model's logits over a whole dataset, in batches.
TensorD predict_probs(const HostModel& model, const Dataset& data);

}  // namespace nnwm
