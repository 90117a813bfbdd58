#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streetpulse/rng.hpp"
#include "streetpulse/tensor.hpp"

namespace streetpulse {

// ---------------------------------------------------------------------------
// Layer primitives.
//
// Dot-product style reductions accumulate in double, in a fixed ascending
// index order with a single accumulator per output element. Storage is
// float32 throughout; the fixed order makes runs bit-reproducible and lets
// tests compare against naive reference loops exactly.
// ---------------------------------------------------------------------------

// Valid (no padding) stride-1 cross-correlation:
//   out[o,y,x] = bias[o] + sum_{c,i,j} input[c,y+i,x+j] * kernels[o,c,i,j]
// with the sum taken over c, then i, then j, ascending.
inline Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.shape.size() != 3 || kernels.shape.size() != 4 || bias.shape.size() != 1) {
    throw std::invalid_argument("conv2d: input must be CxHxW, kernels OxCxKxK, bias O");
  }
  const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
  const int O = kernels.shape[0], K = kernels.shape[2];
  if (kernels.shape[1] != C) throw std::invalid_argument("conv2d: channel count mismatch");
  if (kernels.shape[3] != K) throw std::invalid_argument("conv2d: kernels must be square");
  if (bias.shape[0] != O) throw std::invalid_argument("conv2d: bias length mismatch");
  if (K > H || K > W) throw std::invalid_argument("conv2d: kernel larger than input");
  const int OH = H - K + 1, OW = W - K + 1;
  Tensor out({O, OH, OW});
  std::vector<double> acc(static_cast<std::size_t>(OW));
  for (int o = 0; o < O; ++o) {
    for (int y = 0; y < OH; ++y) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(bias.data[o]));
      for (int c = 0; c < C; ++c) {
        for (int i = 0; i < K; ++i) {
          const float* row = &input.data[(static_cast<std::size_t>(c) * H + y + i) * W];
          for (int j = 0; j < K; ++j) {
            const double kv = kernels.data[((static_cast<std::size_t>(o) * C + c) * K + i) * K + j];
            const float* in = row + j;
            for (int x = 0; x < OW; ++x) acc[x] += kv * in[x];
          }
        }
      }
      float* dst = &out.data[(static_cast<std::size_t>(o) * OH + y) * OW];
      for (int x = 0; x < OW; ++x) dst[x] = static_cast<float>(acc[x]);
    }
  }
  return out;
}

struct ConvGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

inline ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& kernels) {
  const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
  const int O = kernels.shape[0], K = kernels.shape[2];
  const int OH = H - K + 1, OW = W - K + 1;
  if (grad_out.shape != std::vector<int>{O, OH, OW}) {
    throw std::invalid_argument("conv2d_backward: grad shape mismatch");
  }
  ConvGrads g{Tensor(input.shape), Tensor(kernels.shape), Tensor({O})};

  for (int o = 0; o < O; ++o) {
    double s = 0.0;
    const float* go = &grad_out.data[static_cast<std::size_t>(o) * OH * OW];
    for (int t = 0; t < OH * OW; ++t) s += go[t];
    g.bias.data[o] = static_cast<float>(s);
  }

  for (int o = 0; o < O; ++o) {
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          double s = 0.0;
          for (int y = 0; y < OH; ++y) {
            const float* go = &grad_out.data[(static_cast<std::size_t>(o) * OH + y) * OW];
            const float* in = &input.data[(static_cast<std::size_t>(c) * H + y + i) * W + j];
            for (int x = 0; x < OW; ++x) s += static_cast<double>(go[x]) * in[x];
          }
          g.kernels.data[((static_cast<std::size_t>(o) * C + c) * K + i) * K + j] =
              static_cast<float>(s);
        }
      }
    }
  }

  std::vector<double> gin(input.numel(), 0.0);
  for (int c = 0; c < C; ++c) {
    for (int o = 0; o < O; ++o) {
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          const double kv = kernels.data[((static_cast<std::size_t>(o) * C + c) * K + i) * K + j];
          for (int y = 0; y < OH; ++y) {
            const float* go = &grad_out.data[(static_cast<std::size_t>(o) * OH + y) * OW];
            double* dst = &gin[(static_cast<std::size_t>(c) * H + y + i) * W + j];
            for (int x = 0; x < OW; ++x) dst[x] += kv * go[x];
          }
        }
      }
    }
  }
  for (std::size_t t = 0; t < gin.size(); ++t) g.input.data[t] = static_cast<float>(gin[t]);
  return g;
}

inline Tensor relu_forward(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
  return out;
}

// Subgradient at 0 is 0.
inline Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input) {
  if (grad_out.shape != saved_input.shape) {
    throw std::invalid_argument("relu_backward: shape mismatch");
  }
  Tensor out = grad_out;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!(saved_input.data[i] > 0.0f)) out.data[i] = 0.0f;
  }
  return out;
}

struct PoolResult {
  Tensor output;
  std::vector<std::int32_t> argmax;  // flat input index per output element
};

// 2x2 window, stride 2. Ties go to the first maximum in row-major window
// order.
inline PoolResult maxpool2_forward(const Tensor& x) {
  if (x.shape.size() != 3) throw std::invalid_argument("maxpool2: input must be CxHxW");
  const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
  if (H % 2 != 0 || W % 2 != 0) throw std::invalid_argument("maxpool2: extents must be even");
  const int OH = H / 2, OW = W / 2;
  PoolResult r{Tensor({C, OH, OW}), {}};
  r.argmax.resize(r.output.numel());
  std::size_t out_idx = 0;
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < OH; ++y) {
      for (int x2 = 0; x2 < OW; ++x2) {
        float best = -std::numeric_limits<float>::infinity();
        std::int32_t best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx =
                (static_cast<std::size_t>(c) * H + 2 * y + dy) * W + 2 * x2 + dx;
            if (x.data[idx] > best) {
              best = x.data[idx];
              best_idx = static_cast<std::int32_t>(idx);
            }
          }
        }
        r.output.data[out_idx] = best;
        r.argmax[out_idx] = best_idx;
        ++out_idx;
      }
    }
  }
  return r;
}

inline Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<std::int32_t>& argmax,
                                const std::vector<int>& input_shape) {
  if (grad_out.numel() != argmax.size()) {
    throw std::invalid_argument("maxpool2_backward: argmax length mismatch");
  }
  Tensor out(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    out.data[argmax[i]] += grad_out.data[i];
  }
  return out;
}

// out = W x + b, summing over the input index ascending.
inline Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (x.shape.size() != 1 || weights.shape.size() != 2 || bias.shape.size() != 1) {
    throw std::invalid_argument("dense: x must be rank 1, weights rank 2, bias rank 1");
  }
  const int n = x.shape[0], m = weights.shape[0];
  if (weights.shape[1] != n || bias.shape[0] != m) {
    throw std::invalid_argument("dense: shape mismatch");
  }
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    double s = bias.data[i];
    const float* row = &weights.data[static_cast<std::size_t>(i) * n];
    for (int j = 0; j < n; ++j) s += static_cast<double>(row[j]) * x.data[j];
    out.data[i] = static_cast<float>(s);
  }
  return out;
}

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

inline DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& weights) {
  const int n = x.shape[0], m = weights.shape[0];
  if (grad_out.shape != std::vector<int>{m}) {
    throw std::invalid_argument("dense_backward: grad shape mismatch");
  }
  DenseGrads g{Tensor({n}), Tensor(weights.shape), grad_out};
  std::vector<double> gx(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < m; ++i) {
    const double go = grad_out.data[i];
    const float* row = &weights.data[static_cast<std::size_t>(i) * n];
    float* grow = &g.weights.data[static_cast<std::size_t>(i) * n];
    for (int j = 0; j < n; ++j) {
      gx[j] += go * row[j];
      grow[j] = static_cast<float>(go * x.data[j]);
    }
  }
  for (int j = 0; j < n; ++j) g.input.data[j] = static_cast<float>(gx[j]);
  return g;
}

// exp(x - max(x)) normalized to sum 1; the max subtraction keeps the
// exponentials bounded so the output is always finite.
inline Tensor softmax(const Tensor& logits) {
  if (logits.shape.size() != 1) throw std::invalid_argument("softmax: input must be rank 1");
  float mx = logits.data[0];
  for (float v : logits.data) mx = std::max(mx, v);
  std::vector<double> e(logits.numel());
  double sum = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = std::exp(static_cast<double>(logits.data[i]) - mx);
    sum += e[i];
  }
  Tensor out({logits.shape[0]});
  for (std::size_t i = 0; i < e.size(); ++i) out.data[i] = static_cast<float>(e[i] / sum);
  return out;
}

// -ln(probs[true_class]), with the probability floored at 1e-12.
inline double cross_entropy(const Tensor& probs, int true_class) {
  if (probs.shape.size() != 1) throw std::invalid_argument("cross_entropy: probs must be rank 1");
  if (true_class < 0 || true_class >= probs.shape[0]) {
    throw std::invalid_argument("cross_entropy: class index out of range");
  }
  const double p = std::max(static_cast<double>(probs.data[true_class]), 1e-12);
  return -std::log(p);
}

// Gradient of cross_entropy(softmax(logits)) with respect to the logits.
inline Tensor cross_entropy_softmax_grad(const Tensor& probs, int true_class) {
  if (true_class < 0 || true_class >= probs.shape[0]) {
    throw std::invalid_argument("cross_entropy_softmax_grad: class index out of range");
  }
  Tensor g = probs;
  g.data[true_class] -= 1.0f;
  return g;
}

// ---------------------------------------------------------------------------
// Networks: a layer stack plus per-layer weights.
// ---------------------------------------------------------------------------

enum class LayerKind : std::uint8_t {
  conv2d = 0,
  relu = 1,
  maxpool2 = 2,
  flatten = 3,
  dense = 4,
  softmax = 5,
};

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int in_channels = 0, out_channels = 0, kernel = 0;  // conv2d
  int in_units = 0, out_units = 0;                    // dense

  static LayerSpec conv2d(int in_ch, int out_ch, int k) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel = k;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{LayerKind::relu}; }
  static LayerSpec maxpool2() { return LayerSpec{LayerKind::maxpool2}; }
  static LayerSpec flatten() { return LayerSpec{LayerKind::flatten}; }
  static LayerSpec dense(int in, int out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_units = in;
    s.out_units = out;
    return s;
  }
  static LayerSpec softmax() { return LayerSpec{LayerKind::softmax}; }

  bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
  bool operator==(const LayerSpec&) const = default;
};

struct LayerWeights {
  Tensor weights;  // empty for parameterless layers
  Tensor bias;
  bool operator==(const LayerWeights&) const = default;
};

using ModelWeights = std::vector<LayerWeights>;

// Output shape after each layer, or a thrown invalid_argument naming the
// first incompatible layer.
inline std::vector<std::vector<int>> infer_shapes(const std::vector<LayerSpec>& spec,
                                                  const std::vector<int>& input_shape) {
  std::vector<std::vector<int>> shapes;
  std::vector<int> cur = input_shape;
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const LayerSpec& ls = spec[l];
    const auto fail = [&](const std::string& why) {
      throw std::invalid_argument("layer " + std::to_string(l) + ": " + why);
    };
    switch (ls.kind) {
      case LayerKind::conv2d: {
        if (cur.size() != 3) fail("conv2d expects CxHxW input");
        if (cur[0] != ls.in_channels) fail("conv2d channel mismatch");
        if (cur[1] < ls.kernel || cur[2] < ls.kernel) fail("conv2d input smaller than kernel");
        cur = {ls.out_channels, cur[1] - ls.kernel + 1, cur[2] - ls.kernel + 1};
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2: {
        if (cur.size() != 3) fail("maxpool2 expects CxHxW input");
        if (cur[1] % 2 != 0 || cur[2] % 2 != 0) fail("maxpool2 needs even extents");
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      }
      case LayerKind::flatten: {
        int n = 1;
        for (int e : cur) n *= e;
        cur = {n};
        break;
      }
      case LayerKind::dense: {
        if (cur.size() != 1) fail("dense expects rank-1 input");
        if (cur[0] != ls.in_units) fail("dense unit mismatch");
        cur = {ls.out_units};
        break;
      }
      case LayerKind::softmax: {
        if (cur.size() != 1) fail("softmax expects rank-1 input");
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

// He-uniform initialization, bound sqrt(6 / fan_in), drawn layer by layer in
// storage order from a SeededRng. Biases start at zero.
inline ModelWeights init_weights(const std::vector<LayerSpec>& spec, std::uint32_t seed) {
  SeededRng rng(seed);
  ModelWeights w(spec.size());
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const LayerSpec& ls = spec[l];
    if (ls.kind == LayerKind::conv2d) {
      const float bound =
          std::sqrt(6.0f / (static_cast<float>(ls.in_channels) * ls.kernel * ls.kernel));
      w[l].weights = Tensor({ls.out_channels, ls.in_channels, ls.kernel, ls.kernel});
      for (float& v : w[l].weights.data) v = rng.uniform(-bound, bound);
      w[l].bias = Tensor({ls.out_channels});
    } else if (ls.kind == LayerKind::dense) {
      const float bound = std::sqrt(6.0f / static_cast<float>(ls.in_units));
      w[l].weights = Tensor({ls.out_units, ls.in_units});
      for (float& v : w[l].weights.data) v = rng.uniform(-bound, bound);
      w[l].bias = Tensor({ls.out_units});
    }
  }
  return w;
}

inline void check_weights(const std::vector<LayerSpec>& spec, const ModelWeights& weights) {
  if (weights.size() != spec.size()) {
    throw std::invalid_argument("model: weight count does not match layer count");
  }
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const LayerSpec& ls = spec[l];
    if (ls.kind == LayerKind::conv2d) {
      if (weights[l].weights.shape !=
              std::vector<int>{ls.out_channels, ls.in_channels, ls.kernel, ls.kernel} ||
          weights[l].bias.shape != std::vector<int>{ls.out_channels}) {
        throw std::invalid_argument("model: conv2d weight shape mismatch at layer " +
                                    std::to_string(l));
      }
    } else if (ls.kind == LayerKind::dense) {
      if (weights[l].weights.shape != std::vector<int>{ls.out_units, ls.in_units} ||
          weights[l].bias.shape != std::vector<int>{ls.out_units}) {
        throw std::invalid_argument("model: dense weight shape mismatch at layer " +
                                    std::to_string(l));
      }
    }
  }
}

struct ForwardTrace {
  std::vector<Tensor> inputs;                           // input seen by each layer
  std::vector<std::vector<std::int32_t>> pool_argmax;   // filled for maxpool2 layers
  Tensor output;
};

namespace detail {

inline Tensor forward_impl(const std::vector<LayerSpec>& spec, const ModelWeights& weights,
                           const Tensor& input, ForwardTrace* trace) {
  check_weights(spec, weights);
  Tensor cur = input;
  if (trace) {
    trace->inputs.clear();
    trace->pool_argmax.assign(spec.size(), {});
  }
  for (std::size_t l = 0; l < spec.size(); ++l) {
    if (trace) trace->inputs.push_back(cur);
    switch (spec[l].kind) {
      case LayerKind::conv2d:
        cur = conv2d_forward(cur, weights[l].weights, weights[l].bias);
        break;
      case LayerKind::relu:
        cur = relu_forward(cur);
        break;
      case LayerKind::maxpool2: {
        PoolResult r = maxpool2_forward(cur);
        if (trace) trace->pool_argmax[l] = std::move(r.argmax);
        cur = std::move(r.output);
        break;
      }
      case LayerKind::flatten: {
        const int n = static_cast<int>(cur.numel());
        cur = Tensor({n}, std::move(cur.data));
        break;
      }
      case LayerKind::dense:
        cur = dense_forward(cur, weights[l].weights, weights[l].bias);
        break;
      case LayerKind::softmax:
        cur = softmax(cur);
        break;
    }
  }
  if (trace) trace->output = cur;
  return cur;
}

}  // namespace detail

inline Tensor network_forward(const std::vector<LayerSpec>& spec, const ModelWeights& weights,
                              const Tensor& input) {
  return detail::forward_impl(spec, weights, input, nullptr);
}

inline ForwardTrace network_forward_trace(const std::vector<LayerSpec>& spec,
                                          const ModelWeights& weights, const Tensor& input) {
  ForwardTrace trace;
  detail::forward_impl(spec, weights, input, &trace);
  return trace;
}

struct BackwardResult {
  ModelWeights grads;
  Tensor grad_input;
};

namespace detail {

inline BackwardResult backward_from(const std::vector<LayerSpec>& spec, const ModelWeights& weights,
                                    const ForwardTrace& trace, Tensor grad, std::size_t top_layer) {
  BackwardResult r;
  r.grads.resize(spec.size());
  for (std::size_t l = top_layer + 1; l-- > 0;) {
    switch (spec[l].kind) {
      case LayerKind::conv2d: {
        ConvGrads g = conv2d_backward(grad, trace.inputs[l], weights[l].weights);
        r.grads[l] = {std::move(g.kernels), std::move(g.bias)};
        grad = std::move(g.input);
        break;
      }
      case LayerKind::relu:
        grad = relu_backward(grad, trace.inputs[l]);
        break;
      case LayerKind::maxpool2:
        grad = maxpool2_backward(grad, trace.pool_argmax[l], trace.inputs[l].shape);
        break;
      case LayerKind::flatten:
        grad = Tensor(trace.inputs[l].shape, std::move(grad.data));
        break;
      case LayerKind::dense: {
        DenseGrads g = dense_backward(grad, trace.inputs[l], weights[l].weights);
        r.grads[l] = {std::move(g.weights), std::move(g.bias)};
        grad = std::move(g.input);
        break;
      }
      case LayerKind::softmax:
        throw std::invalid_argument(
            "network_backward: softmax is only supported as the final layer, fused with "
            "cross-entropy");
    }
  }
  r.grad_input = std::move(grad);
  return r;
}

}  // namespace detail

// Backward pass of cross_entropy(softmax(...)) for a stack whose final layer
// is softmax; the fused logit gradient is probs - onehot(true_class).
inline BackwardResult network_backward(const std::vector<LayerSpec>& spec,
                                       const ModelWeights& weights, const ForwardTrace& trace,
                                       int true_class) {
  if (spec.empty() || spec.back().kind != LayerKind::softmax) {
    throw std::invalid_argument("network_backward: final layer must be softmax");
  }
  Tensor grad = cross_entropy_softmax_grad(trace.output, true_class);
  return detail::backward_from(spec, weights, trace, std::move(grad), spec.size() - 2);
}

// Backward pass of sum(outputs) for stacks without a softmax layer.
inline BackwardResult network_backward_sum(const std::vector<LayerSpec>& spec,
                                           const ModelWeights& weights, const ForwardTrace& trace) {
  if (spec.empty()) throw std::invalid_argument("network_backward_sum: empty network");
  Tensor grad(trace.output.shape);
  std::fill(grad.data.begin(), grad.data.end(), 1.0f);
  return detail::backward_from(spec, weights, trace, std::move(grad), spec.size() - 1);
}

// ---------------------------------------------------------------------------
// SGD with momentum: v <- momentum * v - lr * g; w <- w + v.
// ---------------------------------------------------------------------------

inline void sgd_step(ModelWeights& weights, const ModelWeights& grads, float lr, float momentum,
                     ModelWeights& velocity) {
  if (!(lr > 0.0f)) throw std::invalid_argument("sgd_step: lr must be > 0");
  if (!(momentum >= 0.0f && momentum < 1.0f)) {
    throw std::invalid_argument("sgd_step: momentum must be in [0,1)");
  }
  if (grads.size() != weights.size() || velocity.size() != weights.size()) {
    throw std::invalid_argument("sgd_step: mismatched model sizes");
  }
  const auto update = [&](Tensor& w, const Tensor& g, Tensor& v) {
    if (w.data.empty()) return;
    if (g.shape != w.shape || v.shape != w.shape) {
      throw std::invalid_argument("sgd_step: tensor shape mismatch");
    }
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      v.data[i] = momentum * v.data[i] - lr * g.data[i];
      w.data[i] += v.data[i];
    }
  };
  for (std::size_t l = 0; l < weights.size(); ++l) {
    update(weights[l].weights, grads[l].weights, velocity[l].weights);
    update(weights[l].bias, grads[l].bias, velocity[l].bias);
  }
}

// Zero-filled velocity (or gradient accumulator) matching a weight set.
inline ModelWeights zeros_like(const ModelWeights& weights) {
  ModelWeights z(weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].weights.data.empty()) z[l].weights = Tensor(weights[l].weights.shape);
    if (!weights[l].bias.data.empty()) z[l].bias = Tensor(weights[l].bias.shape);
  }
  return z;
}

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.
// ---------------------------------------------------------------------------

// Error scale floors at 1, so near-zero gradients are compared absolutely.
inline double relative_gradient_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1.0) scale = 1.0;
  return diff / scale;
}

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

// Compares analytic gradients to (f(x+eps) - f(x-eps)) / 2eps per coordinate,
// over the input tensor and every parameter tensor. The loss is
// cross-entropy of the softmax output when true_class is set, otherwise the
// plain sum of outputs (stacks without softmax). When max_coords_per_tensor
// is positive, that many coordinates per tensor are sampled with the given
// seed; otherwise every coordinate is checked.
inline GradientCheckReport gradient_check(const std::vector<LayerSpec>& spec, ModelWeights& weights,
                                          Tensor& input, std::optional<int> true_class,
                                          double epsilon, int max_coords_per_tensor,
                                          std::uint32_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("gradient_check: epsilon must be > 0");
  const auto loss = [&]() -> double {
    const Tensor out = network_forward(spec, weights, input);
    if (true_class) return cross_entropy(out, *true_class);
    double s = 0.0;
    for (float v : out.data) s += v;
    return s;
  };

  const ForwardTrace trace = network_forward_trace(spec, weights, input);
  const BackwardResult analytic = true_class ? network_backward(spec, weights, trace, *true_class)
                                             : network_backward_sum(spec, weights, trace);

  SeededRng rng(seed);
  GradientCheckReport report;
  const auto check_tensor = [&](Tensor& values, const Tensor& grads) {
    if (values.data.empty()) return;
    const std::size_t n = values.data.size();
    std::vector<std::size_t> coords;
    if (max_coords_per_tensor > 0 && static_cast<std::size_t>(max_coords_per_tensor) < n) {
      for (int k = 0; k < max_coords_per_tensor; ++k) {
        coords.push_back(rng.below(static_cast<std::uint32_t>(n)));
      }
    } else {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    }
    for (std::size_t idx : coords) {
      const float orig = values.data[idx];
      const float plus = static_cast<float>(orig + epsilon);
      const float minus = static_cast<float>(orig - epsilon);
      values.data[idx] = plus;
      const double f_plus = loss();
      values.data[idx] = minus;
      const double f_minus = loss();
      values.data[idx] = orig;
      const double numeric =
          (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
      const double rel = relative_gradient_error(grads.data[idx], numeric);
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.coords_checked;
    }
  };

  check_tensor(input, analytic.grad_input);
  for (std::size_t l = 0; l < spec.size(); ++l) {
    check_tensor(weights[l].weights, analytic.grads[l].weights);
    check_tensor(weights[l].bias, analytic.grads[l].bias);
  }
  return report;
}

}  // namespace streetpulse
