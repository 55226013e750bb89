/*
 * Copyright 2026 The mcdrop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Layer graph split into a deterministic feature part and a stochastic head.
//
// The feature part is evaluated once per input and cached; the head is
// evaluated once per Monte-Carlo pass with a fresh dropout mask. Dropout uses
// the inverted convention: kept units are scaled by 1/keep_prob when the mask
// is applied, so a pass without dropout needs no rescaling of the weights.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/loss.hpp"
#include "mcdrop/rng.hpp"
#include "mcdrop/tensor.hpp"

namespace mcdrop {

enum class LayerKind {
  Dense,
  Conv,
  ReLU,
  MaxPool2x2,
  GlobalMaxPool,
  Maxout,
  Dropout,
  Softmax,
  Sigmoid,
};

inline std::string kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv: return "conv";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::GlobalMaxPool: return "global_max_pool";
    case LayerKind::Maxout: return "maxout";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Sigmoid: return "sigmoid";
  }
  return "unknown";
}

inline LayerKind parse_kind(const std::string& name) {
  for (auto kind : {LayerKind::Dense, LayerKind::Conv, LayerKind::ReLU, LayerKind::MaxPool2x2,
                    LayerKind::GlobalMaxPool, LayerKind::Maxout, LayerKind::Dropout,
                    LayerKind::Softmax, LayerKind::Sigmoid}) {
    if (kind_name(kind) == name) return kind;
  }
  throw ConfigError("unknown layer kind '" + name + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  // Dense: input/output features. Conv: input/output channels.
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  // Maxout group size.
  std::size_t group = 0;

  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {LayerKind::Dense, in, out, 0, 0, 0};
  }
  static LayerSpec conv(std::size_t in_channels, std::size_t out_channels, std::size_t kh,
                        std::size_t kw) {
    return {LayerKind::Conv, in_channels, out_channels, kh, kw, 0};
  }
  static LayerSpec relu() { return {LayerKind::ReLU}; }
  static LayerSpec maxpool2x2() { return {LayerKind::MaxPool2x2}; }
  static LayerSpec global_max_pool() { return {LayerKind::GlobalMaxPool}; }
  static LayerSpec maxout(std::size_t group = 2) { return {LayerKind::Maxout, 0, 0, 0, 0, group}; }
  static LayerSpec dropout() { return {LayerKind::Dropout}; }
  static LayerSpec softmax() { return {LayerKind::Softmax}; }
  static LayerSpec sigmoid() { return {LayerKind::Sigmoid}; }

  bool has_weights() const { return kind == LayerKind::Dense || kind == LayerKind::Conv; }
  bool is_output_activation() const {
    return kind == LayerKind::Softmax || kind == LayerKind::Sigmoid;
  }

  bool operator==(const LayerSpec&) const = default;
};

// Weight and bias of one layer; both empty for weightless layers.
struct LayerParams {
  Tensor weight;
  Tensor bias;
  bool operator==(const LayerParams&) const = default;
};

inline LayerParams zero_params(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Dense:
      if (spec.in == 0 || spec.out == 0) throw ConfigError("dense layer needs in > 0 and out > 0");
      return {Tensor({spec.out, spec.in}), Tensor({spec.out})};
    case LayerKind::Conv:
      if (spec.in == 0 || spec.out == 0 || spec.kernel_h == 0 || spec.kernel_w == 0) {
        throw ConfigError("conv layer needs positive channels and kernel size");
      }
      return {Tensor({spec.out, spec.in, spec.kernel_h, spec.kernel_w}), Tensor({spec.out})};
    default:
      return {};
  }
}

inline std::string layer_label(std::size_t index, const LayerSpec& spec) {
  return "layer " + std::to_string(index) + " (" + kind_name(spec.kind) + ")";
}

// Output shape of `spec` applied to `in`; throws DimensionError naming the layer.
inline Shape output_shape(const LayerSpec& spec, const Shape& in, std::size_t index) {
  auto fail = [&](const std::string& why) -> DimensionError {
    return DimensionError(layer_label(index, spec) + ": " + why + ", input shape " +
                          shape_string(in));
  };
  switch (spec.kind) {
    case LayerKind::Dense:
      if (shape_size(in) != spec.in) throw fail("expects " + std::to_string(spec.in) + " inputs");
      return {spec.out};
    case LayerKind::Conv:
      if (in.size() != 3 || in[0] != spec.in || in[1] < spec.kernel_h || in[2] < spec.kernel_w) {
        throw fail("expects [" + std::to_string(spec.in) + ",H,W] with H>=" +
                   std::to_string(spec.kernel_h) + ", W>=" + std::to_string(spec.kernel_w));
      }
      return {spec.out, in[1] - spec.kernel_h + 1, in[2] - spec.kernel_w + 1};
    case LayerKind::MaxPool2x2:
      if (in.size() != 3 || in[1] < 2 || in[2] < 2) throw fail("expects [C,H,W] with H,W>=2");
      return {in[0], in[1] / 2, in[2] / 2};
    case LayerKind::GlobalMaxPool:
      if (in.size() != 3) throw fail("expects [C,H,W]");
      return {in[0]};
    case LayerKind::Maxout: {
      const std::size_t width = shape_size(in);
      if (spec.group < 2) throw fail("group size must be at least 2");
      if (width % spec.group != 0) {
        throw fail("group size " + std::to_string(spec.group) + " does not divide width " +
                   std::to_string(width));
      }
      return {width / spec.group};
    }
    case LayerKind::Softmax:
      if (in.size() != 1) throw fail("softmax expects a vector");
      return in;
    case LayerKind::ReLU:
    case LayerKind::Dropout:
    case LayerKind::Sigmoid:
      return in;
  }
  return in;
}

class SplitNetwork {
 public:
  SplitNetwork() = default;

  SplitNetwork(Shape input_shape, std::vector<LayerSpec> feature, std::vector<LayerSpec> head)
      : input_shape_(std::move(input_shape)), split_(feature.size()) {
    layers_ = std::move(feature);
    layers_.insert(layers_.end(), head.begin(), head.end());
    params_.reserve(layers_.size());
    for (const auto& spec : layers_) params_.push_back(zero_params(spec));
  }

  const Shape& input_shape() const noexcept { return input_shape_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  // Index of the first head layer.
  std::size_t split_index() const noexcept { return split_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }

  std::vector<LayerSpec> feature_layers() const {
    return {layers_.begin(), layers_.begin() + static_cast<std::ptrdiff_t>(split_)};
  }
  std::vector<LayerSpec> head_layers() const {
    return {layers_.begin() + static_cast<std::ptrdiff_t>(split_), layers_.end()};
  }

  const LayerParams& params(std::size_t i) const { return params_.at(i); }
  LayerParams& params(std::size_t i) { return params_.at(i); }
  const std::vector<LayerParams>& parameters() const noexcept { return params_; }
  std::vector<LayerParams>& parameters() noexcept { return params_; }

  std::optional<LayerKind> output_activation() const {
    if (!layers_.empty() && layers_.back().is_output_activation()) return layers_.back().kind;
    return std::nullopt;
  }

  // Input shape of every layer followed by the final output shape.
  std::vector<Shape> boundary_shapes() const {
    std::vector<Shape> shapes{input_shape_};
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      shapes.push_back(mcdrop::output_shape(layers_[i], shapes.back(), i));
    }
    return shapes;
  }

  Shape output_shape() const { return boundary_shapes().back(); }
  Shape feature_shape() const { return boundary_shapes()[split_]; }

  // Global indices of the dropout layers, all of which are in the head once
  // the network validates.
  std::vector<std::size_t> dropout_layers() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].kind == LayerKind::Dropout) out.push_back(i);
    }
    return out;
  }

  bool operator==(const SplitNetwork&) const = default;

 private:
  Shape input_shape_;
  std::size_t split_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<LayerParams> params_;
};

// Checks what makes feature caching sound and the layer chain usable:
// no dropout before the split, a consistent shape chain, and softmax/sigmoid
// only as the final layer.
inline void validate_split(const SplitNetwork& net) {
  for (std::size_t i = 0; i < net.split_index(); ++i) {
    if (net.layer(i).kind == LayerKind::Dropout) {
      throw SplitViolation(layer_label(i, net.layer(i)) +
                           " is a dropout layer inside the cached feature part");
    }
  }
  for (std::size_t i = 0; i + 1 < net.layer_count(); ++i) {
    if (net.layer(i).is_output_activation()) {
      throw ConfigError(layer_label(i, net.layer(i)) + " must be the final layer");
    }
  }
  if (net.input_shape().empty() || shape_size(net.input_shape()) == 0) {
    throw DimensionError("network input shape " + shape_string(net.input_shape()) +
                         " is empty");
  }
  net.boundary_shapes();
}

// Per-dropout-layer binary masks for one pass.
struct DropoutMask {
  std::vector<Tensor> masks;
  double keep_prob = 1.0;
  std::uint64_t base_seed = 0;
  std::uint32_t pass = 0;
};

// Mask for pass `pass`: unit u of dropout layer l is kept iff word u of the
// Philox sequence keyed by (base_seed; pass, l, stream) maps below keep_prob.
inline DropoutMask make_dropout_mask(const SplitNetwork& net, double keep_prob,
                                     std::uint64_t base_seed, std::uint32_t pass,
                                     Stream stream = Stream::TestDropout) {
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) {
    throw ArgumentError("keep probability " + std::to_string(keep_prob) + " outside [0,1]");
  }
  DropoutMask mask{{}, keep_prob, base_seed, pass};
  const auto shapes = net.boundary_shapes();
  for (std::size_t layer : net.dropout_layers()) {
    Tensor m(shapes[layer]);
    CounterStream words(base_seed, stream, pass, static_cast<std::uint32_t>(layer));
    for (auto& v : m.data()) v = unit_from_u32(words.next_u32()) < keep_prob ? 1.0 : 0.0;
    mask.masks.push_back(std::move(m));
  }
  return mask;
}

inline DropoutMask all_ones_mask(const SplitNetwork& net) {
  return make_dropout_mask(net, 1.0, 0, 0);
}

namespace detail {

// Logistic function kept strictly inside (0, 1).
inline Tensor sigmoid(const Tensor& z) {
  static constexpr double kLow = std::numeric_limits<double>::min();
  static const double kHigh = std::nextafter(1.0, 0.0);
  return map(z, [](double v) {
    if (v >= 0) return std::min(1.0 / (1.0 + std::exp(-v)), kHigh);
    const double e = std::exp(v);
    return std::max(e / (1.0 + e), kLow);
  });
}

inline Tensor softmax(const Tensor& z) {
  Tensor out = z;
  double hi = z[0];
  for (double v : z.data()) hi = std::max(hi, v);
  double total = 0.0;
  for (auto& v : out.data()) {
    v = std::exp(v - hi);
    total += v;
  }
  for (auto& v : out.data()) v /= total;
  return out;
}

inline Tensor maxpool2x2(const Tensor& x, std::vector<std::size_t>* argmax) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, h / 2, w / 2});
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h / 2; ++y) {
      for (std::size_t xx = 0; xx < w / 2; ++xx, ++o) {
        std::size_t best = (ch * h + 2 * y) * w + 2 * xx;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (ch * h + 2 * y + dy) * w + 2 * xx + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        out[o] = x[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return out;
}

inline Tensor global_max_pool(const Tensor& x, std::vector<std::size_t>* argmax) {
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  Tensor out({c});
  if (argmax) argmax->assign(c, 0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::size_t best = ch * plane;
    for (std::size_t i = ch * plane; i < (ch + 1) * plane; ++i) {
      if (x[i] > x[best]) best = i;
    }
    out[ch] = x[best];
    if (argmax) (*argmax)[ch] = best;
  }
  return out;
}

inline Tensor maxout(const Tensor& x, std::size_t group, std::vector<std::size_t>* argmax) {
  const std::size_t n = x.size() / group;
  Tensor out({n});
  if (argmax) argmax->assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t best = j * group;
    for (std::size_t i = j * group + 1; i < (j + 1) * group; ++i) {
      if (x[i] > x[best]) best = i;
    }
    out[j] = x[best];
    if (argmax) (*argmax)[j] = best;
  }
  return out;
}

inline Tensor apply_dropout(const Tensor& x, const Tensor& mask, double keep_prob) {
  if (keep_prob <= 0.0) return Tensor(x.shape());
  const double inv = 1.0 / keep_prob;
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] == 0.0 ? 0.0 : out[i] * inv;
  return out;
}

struct LayerTrace {
  Tensor input;
  std::vector<std::size_t> argmax;
};

// Runs layers [begin, end). `mask` covers the dropout layers of the whole
// network in order; without a mask dropout is the identity.
inline Tensor run_layers(const SplitNetwork& net, std::size_t begin, std::size_t end, Tensor x,
                         const DropoutMask* mask, std::vector<LayerTrace>* trace) {
  std::size_t dropout_ordinal = 0;
  for (std::size_t i = 0; i < begin; ++i) {
    if (net.layer(i).kind == LayerKind::Dropout) ++dropout_ordinal;
  }
  for (std::size_t i = begin; i < end; ++i) {
    const LayerSpec& spec = net.layer(i);
    const LayerParams& p = net.params(i);
    output_shape(spec, x.shape(), i);
    LayerTrace* t = nullptr;
    if (trace) {
      trace->push_back({x, {}});
      t = &trace->back();
    }
    std::vector<std::size_t>* arg = t ? &t->argmax : nullptr;
    switch (spec.kind) {
      case LayerKind::Dense:
        x = affine(p.weight, p.bias, x);
        break;
      case LayerKind::Conv:
        x = conv2d_valid(x, p.weight, p.bias);
        break;
      case LayerKind::ReLU:
        x = map(x, [](double v) { return v > 0.0 ? v : 0.0; });
        break;
      case LayerKind::MaxPool2x2:
        x = maxpool2x2(x, arg);
        break;
      case LayerKind::GlobalMaxPool:
        x = global_max_pool(x, arg);
        break;
      case LayerKind::Maxout:
        x = maxout(x, spec.group, arg);
        break;
      case LayerKind::Dropout:
        if (mask) {
          if (dropout_ordinal >= mask->masks.size() ||
              mask->masks[dropout_ordinal].shape() != x.shape()) {
            throw DimensionError(layer_label(i, spec) + ": dropout mask does not match input " +
                                 shape_string(x.shape()));
          }
          x = apply_dropout(x, mask->masks[dropout_ordinal], mask->keep_prob);
        }
        ++dropout_ordinal;
        break;
      case LayerKind::Softmax:
        x = softmax(x);
        break;
      case LayerKind::Sigmoid:
        x = sigmoid(x);
        break;
    }
  }
  return x;
}

inline void require_input_shape(const Shape& expected, const Tensor& x, const char* what) {
  if (x.shape() != expected) {
    throw DimensionError(std::string(what) + ": expected input shape " + shape_string(expected) +
                         ", got " + shape_string(x.shape()));
  }
}

}  // namespace detail

// Full pass with every dropout layer acting as the identity.
inline Tensor forward_deterministic(const SplitNetwork& net, const Tensor& x) {
  detail::require_input_shape(net.input_shape(), x, "forward_deterministic");
  return detail::run_layers(net, 0, net.layer_count(), x, nullptr, nullptr);
}

// Output of the last feature layer; the cacheable part of the network.
inline Tensor compute_features(const SplitNetwork& net, const Tensor& x) {
  detail::require_input_shape(net.input_shape(), x, "compute_features");
  return detail::run_layers(net, 0, net.split_index(), x, nullptr, nullptr);
}

// One stochastic pass through the head on cached features.
inline Tensor forward_head(const SplitNetwork& net, const Tensor& features,
                           const DropoutMask& mask) {
  if (mask.masks.size() != net.dropout_layers().size()) {
    throw DimensionError("forward_head: mask holds " + std::to_string(mask.masks.size()) +
                         " layers, network has " + std::to_string(net.dropout_layers().size()) +
                         " dropout layers");
  }
  return detail::run_layers(net, net.split_index(), net.layer_count(), features, &mask, nullptr);
}

// The uncached reference: feature part recomputed, then the head.
inline Tensor forward_full(const SplitNetwork& net, const Tensor& x, const DropoutMask& mask) {
  return forward_head(net, compute_features(net, x), mask);
}

struct Gradients {
  double loss = 0.0;
  std::vector<LayerParams> params;
  Tensor output;
};

// Loss of a network output against a target, consistent with `backward`.
inline double network_loss(const SplitNetwork& net, LossKind loss, const Tensor& y,
                           const Tensor& yhat) {
  if (loss == LossKind::Euclidean) return loss_euclidean(y, yhat);
  const auto act = net.output_activation();
  if (act == LayerKind::Sigmoid) return loss_cross_entropy(y, yhat);
  if (act == LayerKind::Softmax) return loss_categorical_cross_entropy(y, yhat);
  throw ConfigError("cross entropy requires a sigmoid or softmax output layer");
}

// Exact gradients of the loss with respect to every weight and bias. With a
// mask, the dropout layers apply it exactly as in forward_head.
inline Gradients backward(const SplitNetwork& net, const Tensor& x, const Tensor& y,
                          LossKind loss, const DropoutMask* mask = nullptr) {
  const auto act = net.output_activation();
  if (loss == LossKind::CrossEntropy && !act) {
    throw ConfigError("cross entropy requires a sigmoid or softmax output layer");
  }
  detail::require_input_shape(net.input_shape(), x, "backward");
  std::vector<detail::LayerTrace> trace;
  trace.reserve(net.layer_count());
  Gradients out;
  out.output = detail::run_layers(net, 0, net.layer_count(), x, mask, &trace);
  const Tensor& yhat = out.output;
  require_same_shape(y, yhat, "backward target");
  out.loss = network_loss(net, loss, y, yhat);
  out.params.reserve(net.layer_count());
  for (const auto& spec : net.layers()) out.params.push_back(zero_params(spec));

  // Gradient with respect to the input of the output activation, or to the
  // output itself when there is none.
  std::size_t last = net.layer_count();
  Tensor g(yhat.shape());
  if (act) --last;
  if (loss == LossKind::CrossEntropy) {
    double label_mass = 0.0;
    for (double v : y.data()) label_mass += v;
    for (std::size_t i = 0; i < g.size(); ++i) {
      // Cancelled forms: sigmoid + binary CE gives yhat - y; softmax + CE
      // gives yhat * sum(y) - y.
      g[i] = *act == LayerKind::Sigmoid ? yhat[i] - y[i] : yhat[i] * label_mass - y[i];
    }
  } else {
    const Tensor dy = sub(yhat, y);
    if (act == LayerKind::Sigmoid) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = dy[i] * yhat[i] * (1.0 - yhat[i]);
    } else if (act == LayerKind::Softmax) {
      double dot = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += dy[i] * yhat[i];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = yhat[i] * (dy[i] - dot);
    } else {
      g = dy;
    }
  }

  std::size_t dropout_ordinal = 0;
  for (std::size_t i = 0; i < last; ++i) {
    if (net.layer(i).kind == LayerKind::Dropout) ++dropout_ordinal;
  }
  for (std::size_t i = last; i-- > 0;) {
    const LayerSpec& spec = net.layer(i);
    const LayerParams& p = net.params(i);
    const detail::LayerTrace& t = trace[i];
    const Tensor& in = t.input;
    Tensor gin(in.shape());
    switch (spec.kind) {
      case LayerKind::Dense: {
        auto& gw = out.params[i].weight;
        auto& gb = out.params[i].bias;
        const std::size_t rows = spec.out, cols = spec.in;
        for (std::size_t r = 0; r < rows; ++r) {
          gb[r] = g[r];
          for (std::size_t c = 0; c < cols; ++c) {
            gw[r * cols + c] = g[r] * in[c];
            gin[c] += p.weight[r * cols + c] * g[r];
          }
        }
        break;
      }
      case LayerKind::Conv: {
        auto& gk = out.params[i].weight;
        auto& gb = out.params[i].bias;
        const std::size_t channels = in.dim(0), height = in.dim(1), width = in.dim(2);
        const std::size_t kh = spec.kernel_h, kw = spec.kernel_w;
        const std::size_t oh = height - kh + 1, ow = width - kw + 1;
        for (std::size_t k = 0; k < spec.out; ++k) {
          const double* gp = g.data().data() + k * oh * ow;
          for (std::size_t j = 0; j < oh * ow; ++j) gb[k] += gp[j];
          for (std::size_t c = 0; c < channels; ++c) {
            const double* src = in.data().data() + c * height * width;
            double* dst = gin.data().data() + c * height * width;
            for (std::size_t dy = 0; dy < kh; ++dy) {
              for (std::size_t dx = 0; dx < kw; ++dx) {
                const std::size_t kidx = ((k * channels + c) * kh + dy) * kw + dx;
                const double kv = p.weight[kidx];
                double acc = 0.0;
                for (std::size_t yy = 0; yy < oh; ++yy) {
                  const double* s = src + (yy + dy) * width + dx;
                  double* d = dst + (yy + dy) * width + dx;
                  const double* gr = gp + yy * ow;
                  for (std::size_t xx = 0; xx < ow; ++xx) {
                    acc += gr[xx] * s[xx];
                    d[xx] += kv * gr[xx];
                  }
                }
                gk[kidx] += acc;
              }
            }
          }
        }
        break;
      }
      case LayerKind::ReLU:
        for (std::size_t j = 0; j < in.size(); ++j) gin[j] = in[j] > 0.0 ? g[j] : 0.0;
        break;
      case LayerKind::MaxPool2x2:
      case LayerKind::GlobalMaxPool:
      case LayerKind::Maxout:
        for (std::size_t j = 0; j < t.argmax.size(); ++j) gin[t.argmax[j]] += g[j];
        break;
      case LayerKind::Dropout:
        --dropout_ordinal;
        if (mask) {
          gin = detail::apply_dropout(g.reshaped(in.shape()), mask->masks[dropout_ordinal],
                                      mask->keep_prob);
        } else {
          gin = g.reshaped(in.shape());
        }
        break;
      case LayerKind::Softmax:
      case LayerKind::Sigmoid:
        throw ConfigError(layer_label(i, spec) + " must be the final layer");
    }
    g = std::move(gin);
  }
  return out;
}

// Multiply-accumulate count of layers [begin, end) for one input.
inline std::size_t multiply_adds(const SplitNetwork& net, std::size_t begin, std::size_t end) {
  const auto shapes = net.boundary_shapes();
  std::size_t total = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& spec = net.layer(i);
    if (spec.kind == LayerKind::Dense) total += spec.in * spec.out;
    if (spec.kind == LayerKind::Conv) {
      total += shape_size(shapes[i + 1]) * spec.in * spec.kernel_h * spec.kernel_w;
    }
  }
  return total;
}

// Rounds every parameter to the nearest 32-bit float, the checkpoint precision.
inline void round_to_float(SplitNetwork& net) {
  for (auto& p : net.parameters()) {
    for (auto* t : {&p.weight, &p.bias}) {
      for (auto& v : t->data()) v = static_cast<double>(static_cast<float>(v));
    }
  }
}

}  // namespace mcdrop
