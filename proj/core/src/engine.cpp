#include "nnwm/engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <future>
#include <string>

#include "nnwm/error.hpp"

namespace nnwm {

namespace {

using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatD = Eigen::Map<MatD>;
using MapConstMatD = Eigen::Map<const MatD>;
using MapConstMatF = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::atomic<int> g_threads{1};

// Gathers conv patches: row r = (b*H + y)*W + x, column m = (i*S + j)*D + k.
// Zero padding of (S-1)/2 keeps the spatial size.
MatD im2col(const TensorD& x, int s) {
  const int b = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int pad = (s - 1) / 2;
  const int m = s * s * d;
  MatD patches = MatD::Zero(static_cast<long>(b) * h * w, m);
  for (int bi = 0; bi < b; ++bi) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double* row = patches.row((static_cast<long>(bi) * h + y) * w + xx).data();
        for (int i = 0; i < s; ++i) {
          const int sy = y + i - pad;
          if (sy < 0 || sy >= h) continue;
          for (int j = 0; j < s; ++j) {
            const int sx = xx + j - pad;
            if (sx < 0 || sx >= w) continue;
            const double* src = x.data() + ((static_cast<std::size_t>(bi) * d) * h + sy) * w + sx;
            double* dst = row + (i * s + j) * d;
            for (int k = 0; k < d; ++k) dst[k] = src[static_cast<std::size_t>(k) * h * w];
          }
        }
      }
    }
  }
  return patches;
}

// Scatter-add of patch-space gradients back onto the input.
void col2im(const MatD& dpatches, int s, TensorD& dx) {
  const int b = dx.dim(0), d = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
  const int pad = (s - 1) / 2;
  for (int bi = 0; bi < b; ++bi) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const double* row = dpatches.row((static_cast<long>(bi) * h + y) * w + xx).data();
        for (int i = 0; i < s; ++i) {
          const int sy = y + i - pad;
          if (sy < 0 || sy >= h) continue;
          for (int j = 0; j < s; ++j) {
            const int sx = xx + j - pad;
            if (sx < 0 || sx >= w) continue;
            double* dst = dx.data() + ((static_cast<std::size_t>(bi) * d) * h + sy) * w + sx;
            const double* src = row + (i * s + j) * d;
            for (int k = 0; k < d; ++k) dst[static_cast<std::size_t>(k) * h * w] += src[k];
          }
        }
      }
    }
  }
}

MatD conv_weight_matrix(const Layer& layer) {
  const LayerSpec& s = layer.spec;
  const int m = s.filter_size * s.filter_size * s.in_depth;
  return MapConstMatF(layer.weights.data(), m, s.filters).cast<double>();
}

TensorD conv_forward(const Layer& layer, const TensorD& x) {
  const LayerSpec& s = layer.spec;
  const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
  const MatD patches = im2col(x, s.filter_size);
  const MatD out = patches * conv_weight_matrix(layer);  // (B*H*W, L)
  TensorD y({b, s.filters, h, w});
  for (int bi = 0; bi < b; ++bi) {
    for (int l = 0; l < s.filters; ++l) {
      const double bias = static_cast<double>(layer.bias[static_cast<std::size_t>(l)]);
      double* dst = y.data() + (static_cast<std::size_t>(bi) * s.filters + l) * h * w;
      for (int p = 0; p < h * w; ++p) {
        dst[p] = out(static_cast<long>(bi) * h * w + p, l) + bias;
      }
    }
  }
  return y;
}

void conv_backward(const Layer& layer, const TensorD& x, const TensorD& dy, TensorD& dw,
                   TensorD& db, TensorD& dx) {
  const LayerSpec& s = layer.spec;
  const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int m = s.filter_size * s.filter_size * s.in_depth;

  MatD dym(static_cast<long>(b) * h * w, s.filters);
  for (int bi = 0; bi < b; ++bi) {
    for (int l = 0; l < s.filters; ++l) {
      const double* src = dy.data() + (static_cast<std::size_t>(bi) * s.filters + l) * h * w;
      for (int p = 0; p < h * w; ++p) dym(static_cast<long>(bi) * h * w + p, l) = src[p];
    }
  }

  const MatD patches = im2col(x, s.filter_size);
  MapMatD(dw.data(), m, s.filters).noalias() = patches.transpose() * dym;
  Eigen::Map<Eigen::VectorXd>(db.data(), s.filters) = dym.colwise().sum();
  const MatD dpatches = dym * conv_weight_matrix(layer).transpose();
  col2im(dpatches, s.filter_size, dx);
}

TensorD dense_forward(const Layer& layer, const TensorD& x) {
  const LayerSpec& s = layer.spec;
  const int b = x.dim(0);
  TensorD y({b, s.out_features});
  const MatD wm = MapConstMatF(layer.weights.data(), s.in_features, s.out_features).cast<double>();
  MapMatD(y.data(), b, s.out_features).noalias() =
      MapConstMatD(x.data(), b, s.in_features) * wm;
  for (int bi = 0; bi < b; ++bi) {
    for (int o = 0; o < s.out_features; ++o) {
      y.at(bi, o) += static_cast<double>(layer.bias[static_cast<std::size_t>(o)]);
    }
  }
  return y;
}

void dense_backward(const Layer& layer, const TensorD& x, const TensorD& dy, TensorD& dw,
                    TensorD& db, TensorD& dx) {
  const LayerSpec& s = layer.spec;
  const int b = x.dim(0);
  const MatD wm = MapConstMatF(layer.weights.data(), s.in_features, s.out_features).cast<double>();
  MapMatD(dw.data(), s.in_features, s.out_features).noalias() =
      MapConstMatD(x.data(), b, s.in_features).transpose() *
      MapConstMatD(dy.data(), b, s.out_features);
  Eigen::Map<Eigen::VectorXd>(db.data(), s.out_features) =
      MapConstMatD(dy.data(), b, s.out_features).colwise().sum();
  MapMatD(dx.data(), b, s.in_features).noalias() =
      MapConstMatD(dy.data(), b, s.out_features) * wm.transpose();
}

void max_pool_forward(const Layer& layer, const TensorD& x, TensorD& y, std::vector<int>& argmax) {
  const int ph = layer.spec.pool_h, pw = layer.spec.pool_w;
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h / ph, ow = w / pw;
  y = TensorD({b, c, oh, ow});
  argmax.assign(y.size(), -1);
  std::size_t t = 0;
  for (int bi = 0; bi < b; ++bi) {
    for (int ci = 0; ci < c; ++ci) {
      const double* plane = x.data() + (static_cast<std::size_t>(bi) * c + ci) * h * w;
      const std::size_t base = (static_cast<std::size_t>(bi) * c + ci) * h * w;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++t) {
          double best = -std::numeric_limits<double>::infinity();
          int best_off = -1;
          for (int i = 0; i < ph; ++i) {
            for (int j = 0; j < pw; ++j) {
              const int off = (oy * ph + i) * w + ox * pw + j;
              if (plane[off] > best) {  // ties keep the first (lowest offset)
                best = plane[off];
                best_off = off;
              }
            }
          }
          y[t] = best;
          argmax[t] = static_cast<int>(base) + best_off;
        }
      }
    }
  }
}

int batch_dim(const TensorD& t) { return t.dim(0); }

}  // namespace

void set_num_threads(int n) { g_threads.store(n < 1 ? 1 : n); }
int num_threads() { return g_threads.load(); }

Gradients Gradients::zeros_like(const HostModel& model) {
  Gradients g;
  g.weights.reserve(model.layers.size());
  g.bias.reserve(model.layers.size());
  for (const Layer& layer : model.layers) {
    g.weights.emplace_back(layer.has_params() ? TensorD(layer.weights.shape()) : TensorD());
    g.bias.emplace_back(layer.has_params() ? TensorD(layer.bias.shape()) : TensorD());
  }
  return g;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    for (std::size_t k = 0; k < weights[i].size(); ++k) {
      weights[i][k] += scale * other.weights[i][k];
    }
    for (std::size_t k = 0; k < bias[i].size(); ++k) {
      bias[i][k] += scale * other.bias[i][k];
    }
  }
}

namespace {

void check_batch(const HostModel& model, const TensorD& batch) {
  if (batch.rank() != 4 || batch.dim(1) != model.input_shape[0] ||
      batch.dim(2) != model.input_shape[1] || batch.dim(3) != model.input_shape[2]) {
    throw ConfigError("batch shape does not match model input shape");
  }
  if (batch.dim(0) < 1) throw ConfigError("empty batch");
}

ForwardTrace forward_trace_st(const HostModel& model, const TensorD& batch) {
  ForwardTrace trace;
  const std::size_t n = model.layers.size();
  trace.outputs.resize(n);
  trace.pool_argmax.resize(n);
  const TensorD* cur = &batch;
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& layer = model.layers[i];
    const TensorD& x = *cur;
    switch (layer.spec.kind) {
      case LayerKind::conv2d:
        trace.outputs[i] = conv_forward(layer, x);
        break;
      case LayerKind::dense:
        trace.outputs[i] = dense_forward(layer, x);
        break;
      case LayerKind::relu: {
        TensorD y = x;
        for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
        trace.outputs[i] = std::move(y);
        break;
      }
      case LayerKind::max_pool:
        max_pool_forward(layer, x, trace.outputs[i], trace.pool_argmax[i]);
        break;
      case LayerKind::global_avg_pool: {
        const int b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
        TensorD y({b, c});
        for (int bi = 0; bi < b; ++bi) {
          for (int ci = 0; ci < c; ++ci) {
            const double* plane = x.data() + (static_cast<std::size_t>(bi) * c + ci) * hw;
            double sum = 0.0;
            for (int p = 0; p < hw; ++p) sum += plane[p];
            y.at(bi, ci) = sum / hw;
          }
        }
        trace.outputs[i] = std::move(y);
        break;
      }
      case LayerKind::flatten:
        trace.outputs[i] = x.reshaped({x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
        break;
      case LayerKind::residual_add: {
        const TensorD& src = trace.outputs[static_cast<std::size_t>(layer.spec.residual_source)];
        TensorD y = x;
        for (std::size_t k = 0; k < y.size(); ++k) y[k] += src[k];
        trace.outputs[i] = std::move(y);
        break;
      }
    }
    cur = &trace.outputs[i];
  }
  return trace;
}

BackwardResult backprop_st(const HostModel& model, const TensorD& batch, const Targets& targets) {
  ForwardTrace trace = forward_trace_st(model, batch);
  const std::size_t n = model.layers.size();

  BackwardResult res;
  res.logits = trace.outputs.back();
  LossResult loss;
  if (const auto* labels = std::get_if<std::vector<int>>(&targets)) {
    loss = cross_entropy_loss(res.logits, *labels);
  } else {
    loss = soft_target_loss(res.logits, std::get<TensorD>(targets));
  }
  res.loss = loss.value;
  res.grads = Gradients::zeros_like(model);

  // Gradient wrt each layer output, accumulated to support skip connections.
  std::vector<TensorD> grad_out(n);
  grad_out[n - 1] = std::move(loss.dlogits);
  auto accumulate = [](TensorD& dst, const TensorD& add, const std::vector<int>& shape) {
    if (dst.empty()) dst = TensorD(shape);
    for (std::size_t k = 0; k < add.size(); ++k) dst[k] += add[k];
  };

  for (std::size_t i = n; i-- > 0;) {
    const Layer& layer = model.layers[i];
    const TensorD& x = i == 0 ? batch : trace.outputs[i - 1];
    TensorD& dy = grad_out[i];
    if (dy.empty()) dy = TensorD(trace.outputs[i].shape());
    TensorD dx(x.shape());
    switch (layer.spec.kind) {
      case LayerKind::conv2d:
        conv_backward(layer, x, dy, res.grads.weights[i], res.grads.bias[i], dx);
        break;
      case LayerKind::dense:
        dense_backward(layer, x, dy, res.grads.weights[i], res.grads.bias[i], dx);
        break;
      case LayerKind::relu:
        for (std::size_t k = 0; k < dx.size(); ++k) dx[k] = x[k] > 0.0 ? dy[k] : 0.0;
        break;
      case LayerKind::max_pool: {
        const std::vector<int>& argmax = trace.pool_argmax[i];
        for (std::size_t t = 0; t < argmax.size(); ++t) {
          dx[static_cast<std::size_t>(argmax[t])] += dy[t];
        }
        break;
      }
      case LayerKind::global_avg_pool: {
        const int b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
        for (int bi = 0; bi < b; ++bi) {
          for (int ci = 0; ci < c; ++ci) {
            const double g = dy.at(bi, ci) / hw;
            double* plane = dx.data() + (static_cast<std::size_t>(bi) * c + ci) * hw;
            for (int p = 0; p < hw; ++p) plane[p] = g;
          }
        }
        break;
      }
      case LayerKind::flatten:
        dx = dy.reshaped(x.shape());
        break;
      case LayerKind::residual_add: {
        dx = dy;
        const auto src = static_cast<std::size_t>(layer.spec.residual_source);
        accumulate(grad_out[src], dy, trace.outputs[src].shape());
        break;
      }
    }
    if (i > 0) accumulate(grad_out[i - 1], dx, x.shape());
  }
  return res;
}

TensorD slice_batch(const TensorD& batch, int begin, int count) {
  const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const std::size_t stride = static_cast<std::size_t>(c) * h * w;
  TensorD out({count, c, h, w});
  std::copy_n(batch.data() + begin * stride, count * stride, out.data());
  return out;
}

Targets slice_targets(const Targets& targets, int begin, int count) {
  if (const auto* labels = std::get_if<std::vector<int>>(&targets)) {
    return std::vector<int>(labels->begin() + begin, labels->begin() + begin + count);
  }
  const TensorD& probs = std::get<TensorD>(targets);
  const int c = probs.dim(1);
  TensorD out({count, c});
  std::copy_n(probs.data() + static_cast<std::size_t>(begin) * c,
              static_cast<std::size_t>(count) * c, out.data());
  return out;
}

}  // namespace

ForwardTrace forward_trace(const HostModel& model, const TensorD& batch) {
  check_batch(model, batch);
  return forward_trace_st(model, batch);
}

TensorD forward(const HostModel& model, const TensorD& batch) {
  check_batch(model, batch);
  const int b = batch_dim(batch);
  const int workers = std::min(num_threads(), b);
  if (workers <= 1) return forward_trace_st(model, batch).outputs.back();

  std::vector<std::future<TensorD>> parts;
  const int chunk = (b + workers - 1) / workers;
  for (int begin = 0; begin < b; begin += chunk) {
    const int count = std::min(chunk, b - begin);
    parts.push_back(std::async(std::launch::async, [&, begin, count] {
      return forward_trace_st(model, slice_batch(batch, begin, count)).outputs.back();
    }));
  }
  TensorD logits({b, model.num_classes});
  int row = 0;
  for (auto& f : parts) {
    TensorD part = f.get();
    std::copy_n(part.data(), part.size(),
                logits.data() + static_cast<std::size_t>(row) * model.num_classes);
    row += part.dim(0);
  }
  return logits;
}

BackwardResult backprop(const HostModel& model, const TensorD& batch, const Targets& targets) {
  check_batch(model, batch);
  const int b = batch_dim(batch);
  const int workers = std::min(num_threads(), b);
  if (workers <= 1) return backprop_st(model, batch, targets);

  std::vector<std::future<BackwardResult>> parts;
  const int chunk = (b + workers - 1) / workers;
  std::vector<int> begins;
  for (int begin = 0; begin < b; begin += chunk) {
    const int count = std::min(chunk, b - begin);
    begins.push_back(count);
    parts.push_back(std::async(std::launch::async, [&, begin, count] {
      return backprop_st(model, slice_batch(batch, begin, count), slice_targets(targets, begin, count));
    }));
  }
  BackwardResult total;
  total.loss = 0.0;
  total.logits = TensorD({b, model.num_classes});
  total.grads = Gradients::zeros_like(model);
  int row = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    BackwardResult part = parts[p].get();
    const double weight = static_cast<double>(begins[p]) / b;
    total.loss += weight * part.loss;
    total.grads.add_scaled(part.grads, weight);
    std::copy_n(part.logits.data(), part.logits.size(),
                total.logits.data() + static_cast<std::size_t>(row) * model.num_classes);
    row += begins[p];
  }
  return total;
}

Gradients backward(const HostModel& model, const TensorD& batch, const std::vector<int>& labels) {
  return backprop(model, batch, Targets(labels)).grads;
}

Gradients backward(const HostModel& model, const TensorD& batch, const TensorD& soft_targets) {
  return backprop(model, batch, Targets(soft_targets)).grads;
}

}  // namespace nnwm
