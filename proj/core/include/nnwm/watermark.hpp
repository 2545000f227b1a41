#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nnwm/model.hpp"
#include "nnwm/tensor.hpp"

namespace nnwm {

enum class KeyFamily { direct, diff, random };

const char* key_family_name(KeyFamily f);
KeyFamily key_family_from_name(const std::string& name);

/// Secret T x M projection used for both embedding and extraction.
/// Row layouts by family:
///   direct: one entry 1, rest 0 (bit j lives in a single mean parameter).
///   diff:   one +1 and one -1 at distinct columns (bit j lives in a
///           difference of two mean parameters).
///   random: i.i.d. standard normal entries.
/// Matrices regenerate deterministically from (family, t, m, seed); matrices
/// supplied from outside carry explicit_matrix = true and keep their values.
struct KeyMatrix {
  KeyFamily family = KeyFamily::random;
  int t = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::vector<double> x;  // row-major T x M
  bool explicit_matrix = false;

  double at(int row, int col) const { return x[static_cast<std::size_t>(row) * m + col]; }
};

/// T-bit payload.
struct WatermarkBits {
  std::vector<std::uint8_t> bits;

  int size() const { return static_cast<int>(bits.size()); }
  static WatermarkBits ones(int t);
  /// Parses a string of '0'/'1' characters; DataError on anything else.
  static WatermarkBits from_string(const std::string& s);
  std::string to_string() const;
};

/// Extraction statistics. No embedded/not-embedded verdict is made; callers
/// judge from the activations, their histogram and frac_near_half.
struct DetectionReport {
  std::vector<double> activations;    // y_j, sigmoid of the clamped logits
  WatermarkBits extracted;
  double ber = 0.0;                   // against the reference payload
  double mean_abs_logit = 0.0;
  double frac_near_half = 0.0;        // fraction of y_j in [0.45, 0.55]
  std::array<int, 20> histogram{};    // y_j counts over 20 equal bins of [0,1]
  bool zero_projection = false;       // all logits exactly 0 (degenerate input)
  bool overdetermined = false;        // T > M
};

/// Mean of a (S, S, D, L) conv weight tensor over its L filters, flattened
/// in row-major (i, j, k) order to length M = S*S*D.
std::vector<double> mean_over_filters(const TensorF& conv_weights);

/// Number of mean parameters (S*S*D) of a conv layer.
int embed_dim(const LayerSpec& conv_spec);

/// Deterministic key construction from the documented generator seeded with
/// `seed`. Column draws for direct/diff use next_below(M) uniformly with
/// replacement across rows; random fills row-major with next_normal().
KeyMatrix generate_key(KeyFamily family, int t, int m, std::uint64_t seed);

/// z = X w.
std::vector<double> project(const KeyMatrix& key, const std::vector<double>& w);

/// Bit j = 1 iff z_j >= 0 (zero maps to 1).
WatermarkBits extract(const KeyMatrix& key, const std::vector<double>& w);

/// Binary cross entropy of sigmoid(clamp(z, -30, 30)) against the payload.
/// Always >= 0; equals T ln 2 exactly at z = 0.
double embedding_loss(const KeyMatrix& key, const std::vector<double>& w,
                      const WatermarkBits& bits);

/// dE/dw_i = sum_j (y_j - b_j) X_ji.
std::vector<double> embedding_loss_grad(const KeyMatrix& key, const std::vector<double>& w,
                                        const WatermarkBits& bits);

/// Gradient chained through the filter mean: dE/dW_ijkl = (1/L) dE/dw_(ijk).
TensorD embedding_loss_grad_tensor(const KeyMatrix& key, const TensorF& conv_weights,
                                   const WatermarkBits& bits);

/// Hamming distance / T.
double bit_error_rate(const WatermarkBits& extracted, const WatermarkBits& reference);

DetectionReport detection_report(const KeyMatrix& key, const std::vector<double>& w,
                                 const WatermarkBits& reference);

struct DirectEmbedReport {
  double proximity = 0.0;       // 0.5 * ||w - w0||^2 at the end
  double embedding_loss = 0.0;  // E_R at the end
  double ber = 0.0;
  int steps = 0;
};

/// Post-hoc embedding without training: gradient descent on
/// 0.5*||w - w0||^2 + lambda * E_R(w) over the named conv layer's tensor
/// only (w0 is its flat mean at entry). Each step moves every filter by the
/// same per-position amount, so the mean follows plain gradient descent with
/// rate `step_size`. Throws NumericError on divergence.
DirectEmbedReport direct_embed(HostModel& model, const std::string& layer_id,
                               const KeyMatrix& key, const WatermarkBits& bits, double lambda,
                               int steps, double step_size);

}  // namespace nnwm
