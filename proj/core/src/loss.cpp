#include "nnwm/loss.hpp"

#include <cmath>
#include <string>

#include "nnwm/error.hpp"

namespace nnwm {

namespace {

void check_logits(const TensorD& logits) {
  if (logits.rank() != 2) throw ConfigError("logits must have shape (batch, classes)");
  if (!logits.all_finite()) throw NumericError("non-finite logits");
}

}  // namespace

TensorD softmax_rows(const TensorD& logits) {
  check_logits(logits);
  const int b = logits.dim(0);
  const int c = logits.dim(1);
  TensorD out({b, c});
  for (int i = 0; i < b; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * c;
    double* orow = out.data() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < c; ++j) orow[j] /= sum;
  }
  return out;
}

LossResult cross_entropy_loss(const TensorD& logits, const std::vector<int>& labels) {
  check_logits(logits);
  const int b = logits.dim(0);
  const int c = logits.dim(1);
  if (static_cast<int>(labels.size()) != b) {
    throw ConfigError("labels length does not match batch size");
  }
  for (int y : labels) {
    if (y < 0 || y >= c) {
      throw ConfigError("label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    }
  }

  LossResult res;
  res.dlogits = softmax_rows(logits);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
    // -log softmax[label] = -(z_y - mx) + log sum
    total += -(row[labels[static_cast<std::size_t>(i)]] - mx) + std::log(sum);
  }
  res.value = total / b;

  double* g = res.dlogits.data();
  for (int i = 0; i < b; ++i) {
    g[static_cast<std::size_t>(i) * c + labels[static_cast<std::size_t>(i)]] -= 1.0;
  }
  for (std::size_t k = 0; k < res.dlogits.size(); ++k) g[k] /= b;
  return res;
}

LossResult soft_target_loss(const TensorD& logits, const TensorD& teacher_probs) {
  check_logits(logits);
  if (teacher_probs.shape() != logits.shape()) {
    throw ConfigError("teacher distribution shape does not match logits");
  }
  const int b = logits.dim(0);
  const int c = logits.dim(1);
  for (int i = 0; i < b; ++i) {
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      const double p = teacher_probs.at(i, j);
      if (!std::isfinite(p) || p < 0.0) throw DataError("teacher probabilities must be in [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw DataError("teacher probability row " + std::to_string(i) + " sums to " +
                      std::to_string(sum));
    }
  }

  LossResult res;
  res.dlogits = softmax_rows(logits);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
    lse = std::log(lse);
    for (int j = 0; j < c; ++j) {
      const double p = teacher_probs.at(i, j);
      if (p > 0.0) total += p * (lse - (row[j] - mx));
    }
  }
  res.value = total / b;

  double* g = res.dlogits.data();
  const double* t = teacher_probs.data();
  for (std::size_t k = 0; k < res.dlogits.size(); ++k) g[k] = (g[k] - t[k]) / b;
  return res;
}

}  // namespace nnwm
