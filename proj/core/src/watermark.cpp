#include "nnwm/watermark.hpp"

#include <cmath>

#include "nnwm/error.hpp"
#include "nnwm/rng.hpp"

namespace nnwm {

namespace {

constexpr double kLogitClamp = 30.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log sigmoid(z), stable on both tails.
double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

void check_dims(const KeyMatrix& key, const std::vector<double>& w) {
  if (key.t < 1 || key.m < 1) throw ConfigError("key matrix must have T, M >= 1");
  if (static_cast<int>(w.size()) != key.m) {
    throw ConfigError("key expects M=" + std::to_string(key.m) + " parameters, got " +
                      std::to_string(w.size()));
  }
  if (static_cast<std::size_t>(key.t) * key.m != key.x.size()) {
    throw ConfigError("key matrix storage does not match T x M");
  }
}

void check_bits(const KeyMatrix& key, const WatermarkBits& bits) {
  if (bits.size() != key.t) {
    throw ConfigError("payload length " + std::to_string(bits.size()) +
                      " does not match key T=" + std::to_string(key.t));
  }
  for (std::uint8_t b : bits.bits) {
    if (b > 1) throw DataError("payload bits must be 0 or 1");
  }
}

}  // namespace

const char* key_family_name(KeyFamily f) {
  switch (f) {
    case KeyFamily::direct: return "direct";
    case KeyFamily::diff: return "diff";
    case KeyFamily::random: return "random";
  }
  return "?";
}

KeyFamily key_family_from_name(const std::string& name) {
  if (name == "direct") return KeyFamily::direct;
  if (name == "diff") return KeyFamily::diff;
  if (name == "random") return KeyFamily::random;
  throw ConfigError("unknown key family '" + name + "'");
}

WatermarkBits WatermarkBits::ones(int t) {
  WatermarkBits b;
  b.bits.assign(static_cast<std::size_t>(t), 1);
  return b;
}

WatermarkBits WatermarkBits::from_string(const std::string& s) {
  WatermarkBits b;
  b.bits.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw DataError("payload string must contain only '0'/'1'");
    b.bits.push_back(c == '1' ? 1 : 0);
  }
  if (b.bits.empty()) throw DataError("payload must have at least one bit");
  return b;
}

std::string WatermarkBits::to_string() const {
  std::string s;
  s.reserve(bits.size());
  for (std::uint8_t b : bits) s.push_back(b ? '1' : '0');
  return s;
}

std::vector<double> mean_over_filters(const TensorF& conv_weights) {
  if (conv_weights.rank() != 4) throw ConfigError("conv weights must be rank 4 (S,S,D,L)");
  const int s0 = conv_weights.dim(0), s1 = conv_weights.dim(1);
  const int d = conv_weights.dim(2), l = conv_weights.dim(3);
  const int m = s0 * s1 * d;
  std::vector<double> w(static_cast<std::size_t>(m), 0.0);
  const float* p = conv_weights.data();
  for (int pos = 0; pos < m; ++pos) {
    double sum = 0.0;
    for (int f = 0; f < l; ++f) sum += p[static_cast<std::size_t>(pos) * l + f];
    w[static_cast<std::size_t>(pos)] = sum / l;
  }
  return w;
}

int embed_dim(const LayerSpec& conv_spec) {
  if (conv_spec.kind != LayerKind::conv2d) {
    throw ConfigError("layer '" + conv_spec.name + "' is not a conv2d layer");
  }
  return conv_spec.filter_size * conv_spec.filter_size * conv_spec.in_depth;
}

KeyMatrix generate_key(KeyFamily family, int t, int m, std::uint64_t seed) {
  if (t < 1 || m < 1) throw ConfigError("key needs T >= 1 and M >= 1");
  if (family == KeyFamily::diff && m < 2) {
    throw ConfigError("diff keys need M >= 2 (two distinct columns per row)");
  }
  KeyMatrix key;
  key.family = family;
  key.t = t;
  key.m = m;
  key.seed = seed;
  key.x.assign(static_cast<std::size_t>(t) * m, 0.0);
  SplitMix64 rng(seed);
  switch (family) {
    case KeyFamily::direct:
      for (int j = 0; j < t; ++j) {
        const auto col = rng.next_below(static_cast<std::uint64_t>(m));
        key.x[static_cast<std::size_t>(j) * m + col] = 1.0;
      }
      break;
    case KeyFamily::diff:
      for (int j = 0; j < t; ++j) {
        const auto plus = rng.next_below(static_cast<std::uint64_t>(m));
        auto minus = rng.next_below(static_cast<std::uint64_t>(m - 1));
        if (minus >= plus) ++minus;  // skip the +1 column
        key.x[static_cast<std::size_t>(j) * m + plus] = 1.0;
        key.x[static_cast<std::size_t>(j) * m + minus] = -1.0;
      }
      break;
    case KeyFamily::random:
      for (double& v : key.x) v = rng.next_normal();
      break;
  }
  return key;
}

std::vector<double> project(const KeyMatrix& key, const std::vector<double>& w) {
  check_dims(key, w);
  std::vector<double> z(static_cast<std::size_t>(key.t), 0.0);
  for (int j = 0; j < key.t; ++j) {
    const double* row = key.x.data() + static_cast<std::size_t>(j) * key.m;
    double sum = 0.0;
    for (int i = 0; i < key.m; ++i) sum += row[i] * w[static_cast<std::size_t>(i)];
    z[static_cast<std::size_t>(j)] = sum;
  }
  return z;
}

WatermarkBits extract(const KeyMatrix& key, const std::vector<double>& w) {
  const std::vector<double> z = project(key, w);
  WatermarkBits b;
  b.bits.reserve(z.size());
  for (double v : z) b.bits.push_back(v >= 0.0 ? 1 : 0);
  return b;
}

double embedding_loss(const KeyMatrix& key, const std::vector<double>& w,
                      const WatermarkBits& bits) {
  check_bits(key, bits);
  const std::vector<double> z = project(key, w);
  double loss = 0.0;
  for (int j = 0; j < key.t; ++j) {
    const double zc = std::clamp(z[static_cast<std::size_t>(j)], -kLogitClamp, kLogitClamp);
    // b log y + (1-b) log(1-y) with y = sigmoid(zc); 1-sigmoid(z) = sigmoid(-z)
    loss -= bits.bits[static_cast<std::size_t>(j)] ? log_sigmoid(zc) : log_sigmoid(-zc);
  }
  return loss;
}

std::vector<double> embedding_loss_grad(const KeyMatrix& key, const std::vector<double>& w,
                                        const WatermarkBits& bits) {
  check_bits(key, bits);
  const std::vector<double> z = project(key, w);
  std::vector<double> grad(static_cast<std::size_t>(key.m), 0.0);
  for (int j = 0; j < key.t; ++j) {
    const double zc = std::clamp(z[static_cast<std::size_t>(j)], -kLogitClamp, kLogitClamp);
    const double resid = sigmoid(zc) - static_cast<double>(bits.bits[static_cast<std::size_t>(j)]);
    const double* row = key.x.data() + static_cast<std::size_t>(j) * key.m;
    for (int i = 0; i < key.m; ++i) grad[static_cast<std::size_t>(i)] += resid * row[i];
  }
  return grad;
}

TensorD embedding_loss_grad_tensor(const KeyMatrix& key, const TensorF& conv_weights,
                                   const WatermarkBits& bits) {
  const std::vector<double> w = mean_over_filters(conv_weights);
  const std::vector<double> gw = embedding_loss_grad(key, w, bits);
  const int l = conv_weights.dim(3);
  TensorD g(conv_weights.shape());
  for (std::size_t pos = 0; pos < gw.size(); ++pos) {
    const double v = gw[pos] / l;
    for (int f = 0; f < l; ++f) g[pos * static_cast<std::size_t>(l) + f] = v;
  }
  return g;
}

double bit_error_rate(const WatermarkBits& extracted, const WatermarkBits& reference) {
  if (extracted.size() != reference.size()) {
    throw ConfigError("bit vectors differ in length: " + std::to_string(extracted.size()) +
                      " vs " + std::to_string(reference.size()));
  }
  int errors = 0;
  for (std::size_t i = 0; i < extracted.bits.size(); ++i) {
    errors += extracted.bits[i] != reference.bits[i];
  }
  return static_cast<double>(errors) / extracted.size();
}

DetectionReport detection_report(const KeyMatrix& key, const std::vector<double>& w,
                                 const WatermarkBits& reference) {
  const std::vector<double> z = project(key, w);
  DetectionReport rep;
  rep.activations.reserve(z.size());
  rep.extracted.bits.reserve(z.size());
  rep.zero_projection = true;
  double abs_sum = 0.0;
  int near_half = 0;
  for (double v : z) {
    const double y = sigmoid(std::clamp(v, -kLogitClamp, kLogitClamp));
    rep.activations.push_back(y);
    rep.extracted.bits.push_back(v >= 0.0 ? 1 : 0);
    abs_sum += std::abs(v);
    if (v != 0.0) rep.zero_projection = false;
    if (y >= 0.45 && y <= 0.55) ++near_half;
    int bin = static_cast<int>(y * rep.histogram.size());
    bin = std::clamp<int>(bin, 0, static_cast<int>(rep.histogram.size()) - 1);
    ++rep.histogram[static_cast<std::size_t>(bin)];
  }
  rep.ber = bit_error_rate(rep.extracted, reference);
  rep.mean_abs_logit = abs_sum / key.t;
  rep.frac_near_half = static_cast<double>(near_half) / key.t;
  rep.overdetermined = key.t > key.m;
  return rep;
}

DirectEmbedReport direct_embed(HostModel& model, const std::string& layer_id,
                               const KeyMatrix& key, const WatermarkBits& bits, double lambda,
                               int steps, double step_size) {
  const int idx = model.find_layer(layer_id);
  if (idx < 0) throw ConfigError("no layer named '" + layer_id + "'");
  Layer& layer = model.layers[static_cast<std::size_t>(idx)];
  if (layer.spec.kind != LayerKind::conv2d) {
    throw ConfigError("layer '" + layer_id + "' is not a conv2d layer");
  }
  if (key.m != embed_dim(layer.spec)) {
    throw ConfigError("key M=" + std::to_string(key.m) + " does not match layer M=" +
                      std::to_string(embed_dim(layer.spec)));
  }
  check_bits(key, bits);
  if (lambda < 0.0 || steps < 0 || step_size <= 0.0) {
    throw ConfigError("direct embed needs lambda >= 0, steps >= 0, step size > 0");
  }

  const std::vector<double> w0 = mean_over_filters(layer.weights);
  const int l = layer.spec.filters;
  for (int step = 0; step < steps; ++step) {
    std::vector<double> w = mean_over_filters(layer.weights);
    std::vector<double> g =
        lambda > 0.0 ? embedding_loss_grad(key, w, bits) : std::vector<double>(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double delta = -step_size * ((w[i] - w0[i]) + lambda * g[i]);
      if (!std::isfinite(delta)) {
        throw NumericError("direct embed diverged at step " + std::to_string(step));
      }
      float* filters = layer.weights.data() + i * static_cast<std::size_t>(l);
      for (int f = 0; f < l; ++f) {
        filters[f] = static_cast<float>(static_cast<double>(filters[f]) + delta);
      }
    }
  }

  const std::vector<double> w = mean_over_filters(layer.weights);
  DirectEmbedReport rep;
  rep.steps = steps;
  double prox = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w[i] - w0[i];
    prox += d * d;
  }
  rep.proximity = 0.5 * prox;
  rep.embedding_loss = embedding_loss(key, w, bits);
  rep.ber = bit_error_rate(extract(key, w), bits);
  if (!std::isfinite(rep.embedding_loss)) throw NumericError("direct embed produced non-finite loss");
  return rep;
}

}  // namespace nnwm
