#include "uqf/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uqf/error.hpp"
#include "uqf/kernels.hpp"

namespace uqf {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string layer_label(std::size_t index, const Layer& layer) {
  return "layer " + std::to_string(index) + " (" + std::string(kind_name(kind_of(layer))) + ")";
}

void expect_shape(const Tensor& t, const Shape& want, const std::string& where, const char* what) {
  if (t.shape() != want) {
    throw ShapeError(where + ": " + what + " has shape " + shape_to_string(t.shape()) + ", expected " +
                     shape_to_string(want));
  }
  if (!t.all_finite()) throw NumericError(where + ": " + what + " contains non-finite values");
}

std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

LayerKind kind_of(const Layer& layer) { return static_cast<LayerKind>(layer.index()); }

std::string_view kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense:
      return "dense";
    case LayerKind::conv2d:
      return "conv2d";
    case LayerKind::relu:
      return "relu";
    case LayerKind::maxpool2d:
      return "maxpool2d";
    case LayerKind::flatten:
      return "flatten";
    case LayerKind::softmax:
      return "softmax";
    case LayerKind::dropout:
      return "dropout";
  }
  return "unknown";
}

std::optional<LayerKind> parse_kind(std::string_view name) {
  for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2d, LayerKind::flatten,
                 LayerKind::softmax, LayerKind::dropout}) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::vector<const Tensor*> layer_parameters(const Layer& layer) {
  if (auto* d = std::get_if<DenseLayer>(&layer)) return {&d->weight, &d->bias};
  if (auto* c = std::get_if<Conv2dLayer>(&layer)) return {&c->kernel, &c->bias};
  return {};
}

std::vector<Tensor*> layer_parameters(Layer& layer) {
  if (auto* d = std::get_if<DenseLayer>(&layer)) return {&d->weight, &d->bias};
  if (auto* c = std::get_if<Conv2dLayer>(&layer)) return {&c->kernel, &c->bias};
  return {};
}

// ---------------------------------------------------------------------------
// Network

Network::Network(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (input_shape_.empty() || shape_size(input_shape_) == 0 ||
      std::find(input_shape_.begin(), input_shape_.end(), 0) != input_shape_.end()) {
    throw ShapeError("network input shape must have positive dimensions, got " + shape_to_string(input_shape_));
  }
  if (layers_.empty()) throw ConfigError("network has no layers");
  if (kind_of(layers_.back()) != LayerKind::softmax) throw ConfigError("last layer must be softmax");

  Shape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string where = layer_label(i, layers_[i]);
    Shape next = std::visit(
        Overloaded{
            [&](const DenseLayer& d) -> Shape {
              if (cur.size() != 1 || cur[0] != d.in_dim) {
                throw ShapeError(where + ": expected input [" + std::to_string(d.in_dim) + "], got " +
                                 shape_to_string(cur));
              }
              if (d.out_dim == 0) throw ShapeError(where + ": out_dim must be positive");
              expect_shape(d.weight, {d.out_dim, d.in_dim}, where, "weight");
              expect_shape(d.bias, {d.out_dim}, where, "bias");
              return {d.out_dim};
            },
            [&](const Conv2dLayer& c) -> Shape {
              if (cur.size() != 3 || cur[2] != c.in_ch) {
                throw ShapeError(where + ": expected input [H,W," + std::to_string(c.in_ch) + "], got " +
                                 shape_to_string(cur));
              }
              if (c.kernel_h == 0 || c.kernel_w == 0 || c.out_ch == 0 || c.stride == 0) {
                throw ShapeError(where + ": kernel dims, out_ch and stride must be positive");
              }
              if (cur[0] + 2 * c.padding < c.kernel_h || cur[1] + 2 * c.padding < c.kernel_w) {
                throw ShapeError(where + ": kernel larger than padded input " + shape_to_string(cur));
              }
              expect_shape(c.kernel, {c.kernel_h, c.kernel_w, c.in_ch, c.out_ch}, where, "kernel");
              expect_shape(c.bias, {c.out_ch}, where, "bias");
              return {conv_extent(cur[0], c.kernel_h, c.stride, c.padding),
                      conv_extent(cur[1], c.kernel_w, c.stride, c.padding), c.out_ch};
            },
            [&](const ReluLayer&) -> Shape { return cur; },
            [&](const MaxPool2dLayer& p) -> Shape {
              if (cur.size() != 3) throw ShapeError(where + ": expected [H,W,C] input, got " + shape_to_string(cur));
              if (p.window == 0 || p.stride == 0) throw ShapeError(where + ": window and stride must be positive");
              if (cur[0] < p.window || cur[1] < p.window) {
                throw ShapeError(where + ": window larger than input " + shape_to_string(cur));
              }
              return {(cur[0] - p.window) / p.stride + 1, (cur[1] - p.window) / p.stride + 1, cur[2]};
            },
            [&](const FlattenLayer&) -> Shape { return {shape_size(cur)}; },
            [&](const SoftmaxLayer&) -> Shape {
              if (i + 1 != layers_.size()) throw ConfigError(where + ": softmax must be the last layer");
              if (cur.size() != 1) throw ShapeError(where + ": expected a 1-D input, got " + shape_to_string(cur));
              return cur;
            },
            [&](const DropoutLayer& d) -> Shape {
              if (!(d.rate > 0.0f && d.rate < 1.0f)) {
                throw ConfigError(where + ": dropout rate must be in (0,1), got " + std::to_string(d.rate));
              }
              return cur;
            },
        },
        layers_[i]);
    output_shapes_.push_back(next);
    cur = std::move(next);
  }
  class_count_ = cur[0];
}

const Shape& Network::input_shape_of(std::size_t layer) const {
  return layer == 0 ? input_shape_ : output_shapes_.at(layer - 1);
}

bool Network::has_dropout() const {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return kind_of(l) == LayerKind::dropout; });
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    for (const Tensor* t : layer_parameters(l)) n += t->size();
  }
  return n;
}

std::string describe_layer(const Network& net, std::size_t index) {
  const Layer& layer = net.layers().at(index);
  std::ostringstream out;
  out << layer_label(index, layer) << ' ' << shape_to_string(net.input_shape_of(index)) << " -> "
      << shape_to_string(net.output_shapes()[index]);
  if (auto* d = std::get_if<DropoutLayer>(&layer)) out << " rate=" << d->rate;
  return out.str();
}

std::string Network::summary() const {
  std::ostringstream out;
  out << "input " << shape_to_string(input_shape_) << ", " << class_count_ << " classes, " << parameter_count()
      << " parameters\n";
  for (std::size_t i = 0; i < layers_.size(); ++i) out << "  " << describe_layer(*this, i) << '\n';
  return out.str();
}

Network Network::with_dropout_before_last_dense(float rate) const {
  std::vector<Layer> layers = layers_;
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (kind_of(layers[i]) == LayerKind::dense) {
      layers.insert(layers.begin() + static_cast<std::ptrdiff_t>(i), DropoutLayer{rate});
      return Network(input_shape_, std::move(layers));
    }
  }
  throw ConfigError("cannot insert dropout: network has no dense layer");
}

void Network::apply_update(const ParamGrads& grads, float lr) {
  if (grads.size() != layers_.size()) throw ShapeError("gradient list does not match layer count");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto params = layer_parameters(layers_[i]);
    if (grads[i].size() != params.size()) throw ShapeError("gradient list does not match " + layer_label(i, layers_[i]));
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (grads[i][p].shape() != params[p]->shape()) {
        throw ShapeError("gradient shape mismatch in " + layer_label(i, layers_[i]));
      }
      kernels::axpy(-lr, grads[i][p].values(), params[p]->values());
    }
  }
}

ParamGrads Network::zero_grads() const {
  ParamGrads grads(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (const Tensor* t : layer_parameters(layers_[i])) grads[i].emplace_back(t->shape(), 0.0f);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Layer arithmetic

Tensor softmax(std::span<const float> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> e(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp(static_cast<double>(z[i]) - m);
    s += e[i];
  }
  Tensor p({z.size()});
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = static_cast<float>(e[i] / s);
  return p;
}

namespace {

Tensor conv_forward(const Conv2dLayer& c, const Tensor& in, const Shape& out_shape) {
  const std::size_t H = in.shape()[0], W = in.shape()[1];
  const std::size_t OH = out_shape[0], OW = out_shape[1];
  const auto& kt = kernels::active();
  Tensor out(out_shape);
  for (std::size_t oy = 0; oy < OH; ++oy) {
    for (std::size_t ox = 0; ox < OW; ++ox) {
      float* o = out.data() + (oy * OW + ox) * c.out_ch;
      std::copy_n(c.bias.data(), c.out_ch, o);
      for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) - static_cast<std::ptrdiff_t>(c.padding);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
          const std::ptrdiff_t ix =
              static_cast<std::ptrdiff_t>(ox * c.stride + kx) - static_cast<std::ptrdiff_t>(c.padding);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
          const float* px = in.data() + (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * c.in_ch;
          const float* k = c.kernel.data() + (ky * c.kernel_w + kx) * c.in_ch * c.out_ch;
          for (std::size_t ic = 0; ic < c.in_ch; ++ic) kt.axpy(px[ic], k + ic * c.out_ch, o, c.out_ch);
        }
      }
    }
  }
  return out;
}

Tensor conv_backward(const Conv2dLayer& c, const Tensor& in, const Tensor& gout, std::vector<Tensor>* pg) {
  const std::size_t H = in.shape()[0], W = in.shape()[1];
  const std::size_t OH = gout.shape()[0], OW = gout.shape()[1];
  const auto& kt = kernels::active();
  Tensor gin(in.shape());
  for (std::size_t oy = 0; oy < OH; ++oy) {
    for (std::size_t ox = 0; ox < OW; ++ox) {
      const float* g = gout.data() + (oy * OW + ox) * c.out_ch;
      if (pg) kt.axpy(1.0f, g, (*pg)[1].data(), c.out_ch);
      for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) - static_cast<std::ptrdiff_t>(c.padding);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
          const std::ptrdiff_t ix =
              static_cast<std::ptrdiff_t>(ox * c.stride + kx) - static_cast<std::ptrdiff_t>(c.padding);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
          const std::size_t base = (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * c.in_ch;
          const std::size_t kbase = (ky * c.kernel_w + kx) * c.in_ch * c.out_ch;
          for (std::size_t ic = 0; ic < c.in_ch; ++ic) {
            const float* k = c.kernel.data() + kbase + ic * c.out_ch;
            gin[base + ic] += kt.dot(k, g, c.out_ch);
            if (pg) kt.axpy(in[base + ic], g, (*pg)[0].data() + kbase + ic * c.out_ch, c.out_ch);
          }
        }
      }
    }
  }
  return gin;
}

// Index into `in` of the window maximum feeding output element (oy, ox, ch); first max wins.
std::size_t pool_argmax(const MaxPool2dLayer& p, const Tensor& in, std::size_t oy, std::size_t ox, std::size_t ch) {
  const std::size_t W = in.shape()[1], C = in.shape()[2];
  std::size_t best = ((oy * p.stride) * W + ox * p.stride) * C + ch;
  for (std::size_t wy = 0; wy < p.window; ++wy) {
    for (std::size_t wx = 0; wx < p.window; ++wx) {
      const std::size_t idx = ((oy * p.stride + wy) * W + (ox * p.stride + wx)) * C + ch;
      if (in[idx] > in[best]) best = idx;
    }
  }
  return best;
}

Tensor run_layer(const Layer& layer, const Tensor& in, const Shape& out_shape) {
  return std::visit(
      Overloaded{
          [&](const DenseLayer& d) {
            Tensor out(out_shape);
            kernels::matvec(d.weight.values(), in.values(), d.bias.data(), out.values());
            return out;
          },
          [&](const Conv2dLayer& c) { return conv_forward(c, in, out_shape); },
          [&](const ReluLayer&) {
            Tensor out = in;
            for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
            return out;
          },
          [&](const MaxPool2dLayer& p) {
            Tensor out(out_shape);
            const std::size_t OW = out_shape[1], C = out_shape[2];
            for (std::size_t oy = 0; oy < out_shape[0]; ++oy) {
              for (std::size_t ox = 0; ox < OW; ++ox) {
                for (std::size_t ch = 0; ch < C; ++ch) out[(oy * OW + ox) * C + ch] = in[pool_argmax(p, in, oy, ox, ch)];
              }
            }
            return out;
          },
          [&](const FlattenLayer&) { return in.reshaped(out_shape); },
          [&](const SoftmaxLayer&) { return softmax(in.values()); },
          [&](const DropoutLayer&) { return in; },
      },
      layer);
}

Tensor backward_layer(const Layer& layer, const Tensor& in, const Tensor& gout, std::vector<Tensor>* pg) {
  return std::visit(
      Overloaded{
          [&](const DenseLayer& d) {
            Tensor gin(in.shape());
            const auto& kt = kernels::active();
            for (std::size_t r = 0; r < d.out_dim; ++r) {
              kt.axpy(gout[r], d.weight.data() + r * d.in_dim, gin.data(), d.in_dim);
              if (pg) kt.axpy(gout[r], in.data(), (*pg)[0].data() + r * d.in_dim, d.in_dim);
            }
            if (pg) kt.axpy(1.0f, gout.data(), (*pg)[1].data(), d.out_dim);
            return gin;
          },
          [&](const Conv2dLayer& c) { return conv_backward(c, in, gout, pg); },
          [&](const ReluLayer&) {
            Tensor gin = gout.reshaped(in.shape());
            for (std::size_t i = 0; i < gin.size(); ++i) {
              if (!(in[i] > 0.0f)) gin[i] = 0.0f;
            }
            return gin;
          },
          [&](const MaxPool2dLayer& p) {
            Tensor gin(in.shape());
            const std::size_t OH = gout.shape()[0], OW = gout.shape()[1], C = gout.shape()[2];
            for (std::size_t oy = 0; oy < OH; ++oy) {
              for (std::size_t ox = 0; ox < OW; ++ox) {
                for (std::size_t ch = 0; ch < C; ++ch) {
                  gin[pool_argmax(p, in, oy, ox, ch)] += gout[(oy * OW + ox) * C + ch];
                }
              }
            }
            return gin;
          },
          [&](const FlattenLayer&) { return gout.reshaped(in.shape()); },
          [&](const SoftmaxLayer&) -> Tensor { throw ConfigError("softmax backward is fused with the loss"); },
          [&](const DropoutLayer&) { return gout; },
      },
      layer);
}

void check_input(const Network& net, const Tensor& x) {
  if (x.shape() != net.input_shape()) {
    throw ShapeError("input shape " + shape_to_string(x.shape()) + " does not match network input " +
                     shape_to_string(net.input_shape()));
  }
  if (!x.all_finite()) throw NumericError("input contains non-finite values");
}

void check_finite(const Network& net, const Tensor& t, std::size_t layer) {
  if (!t.all_finite()) throw NumericError("non-finite activation after " + layer_label(layer, net.layers()[layer]));
}

// Multiplies `t` by an inverted-dropout mask and returns the mask actually applied.
std::vector<float> apply_dropout(Tensor& t, float rate, RngStream* rng, MaskPolicy policy) {
  const float scale = 1.0f / (1.0f - rate);
  std::vector<float> mask(t.size(), scale);
  if (policy == MaskPolicy::sample) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (rng->uniform() < static_cast<double>(rate)) mask[i] = 0.0f;
    }
  }
  for (std::size_t i = 0; i < t.size(); ++i) t[i] *= mask[i];
  return mask;
}

// Runs layers [begin, end) from activation `a`.
Tensor run_range(const Network& net, Tensor a, std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    a = run_layer(net.layers()[i], a, net.output_shapes()[i]);
    check_finite(net, a, i);
  }
  return a;
}

std::size_t softmax_index(const Network& net) { return net.layers().size() - 1; }

}  // namespace

// ---------------------------------------------------------------------------
// Passes

Tensor forward(const Network& net, const Tensor& x) {
  check_input(net, x);
  return run_range(net, x, 0, net.layers().size());
}

Tensor logits(const Network& net, const Tensor& x) {
  check_input(net, x);
  return run_range(net, x, 0, softmax_index(net));
}

std::size_t predict_label(const Network& net, const Tensor& x) { return argmax(forward(net, x).values()); }

McSampler::McSampler(const Network& net, const Tensor& x, const McOptions& options) : net_(&net), options_(options) {
  check_input(net, x);
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (auto* d = std::get_if<DropoutLayer>(&layers[i])) sites_.push_back({i, d->rate});
  }
  if (sites_.empty()) {
    if (!options.auto_insert_dropout) {
      throw ConfigError("MC-dropout pass requested on a network without dropout layers (auto-insertion disabled)");
    }
    if (!(options.auto_dropout_rate > 0.0f && options.auto_dropout_rate < 1.0f)) {
      throw ConfigError("auto-inserted dropout rate must be in (0,1)");
    }
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (kind_of(layers[i]) == LayerKind::dense) {
        sites_.push_back({i, options.auto_dropout_rate});
        break;
      }
    }
    if (sites_.empty()) throw ConfigError("MC-dropout auto-insertion needs a dense layer");
  }
  first_site_ = sites_.front().layer;
  prefix_ = run_range(net, x, 0, first_site_);
}

Tensor McSampler::sample(RngStream& rng) const {
  Tensor a = prefix_;
  std::size_t next_site = 0;
  const auto& layers = net_->layers();
  for (std::size_t i = first_site_; i < layers.size(); ++i) {
    if (next_site < sites_.size() && sites_[next_site].layer == i) {
      apply_dropout(a, sites_[next_site].rate, &rng, options_.mask);
      ++next_site;
    }
    a = run_layer(layers[i], a, net_->output_shapes()[i]);
    check_finite(*net_, a, i);
  }
  return a;
}

Tensor forward_mc(const Network& net, const Tensor& x, RngStream& rng, const McOptions& options) {
  return McSampler(net, x, options).sample(rng);
}

LossGradients loss_gradients(const Network& net, const Tensor& x, std::size_t label, RngStream* dropout_rng,
                             bool with_params) {
  check_input(net, x);
  if (label >= net.class_count()) {
    throw ConfigError("label " + std::to_string(label) + " out of range for " + std::to_string(net.class_count()) +
                      " classes");
  }
  const auto& layers = net.layers();
  const std::size_t last = softmax_index(net);

  // inputs[i] is the input of layer i; masks[i] is set for sampled dropout layers.
  std::vector<Tensor> inputs;
  std::vector<std::vector<float>> masks(layers.size());
  inputs.reserve(last + 1);
  inputs.push_back(x);
  for (std::size_t i = 0; i < last; ++i) {
    Tensor out = run_layer(layers[i], inputs.back(), net.output_shapes()[i]);
    if (dropout_rng) {
      if (auto* d = std::get_if<DropoutLayer>(&layers[i])) {
        masks[i] = apply_dropout(out, d->rate, dropout_rng, MaskPolicy::sample);
      }
    }
    check_finite(net, out, i);
    inputs.push_back(std::move(out));
  }

  const Tensor& z = inputs.back();
  LossGradients result;
  result.probabilities = softmax(z.values());
  const double zmax = *std::max_element(z.values().begin(), z.values().end());
  double lse = 0.0;
  for (float v : z.values()) lse += std::exp(static_cast<double>(v) - zmax);
  result.loss = std::log(lse) + zmax - static_cast<double>(z[label]);

  Tensor g = result.probabilities;
  g[label] -= 1.0f;
  if (with_params) result.param_grads = net.zero_grads();
  for (std::size_t i = last; i-- > 0;) {
    std::vector<Tensor>* pg = with_params && !result.param_grads[i].empty() ? &result.param_grads[i] : nullptr;
    if (!masks[i].empty()) {
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= masks[i][j];
    }
    g = backward_layer(layers[i], inputs[i], g, pg);
  }
  result.input_grad = g.reshaped(x.shape());
  if (!result.input_grad.all_finite()) throw NumericError("non-finite input gradient");
  if (with_params) {
    for (std::size_t i = 0; i < result.param_grads.size(); ++i) {
      for (const auto& t : result.param_grads[i]) {
        if (!t.all_finite()) throw NumericError("non-finite parameter gradient in " + layer_label(i, layers[i]));
      }
    }
  }
  return result;
}

Tensor backward(const Network& net, const Tensor& x, std::size_t true_label) {
  return loss_gradients(net, x, true_label).input_grad;
}

double cross_entropy(const Network& net, const Tensor& x, std::size_t label, RngStream* dropout_rng) {
  return loss_gradients(net, x, label, dropout_rng, false).loss;
}

}  // namespace uqf
