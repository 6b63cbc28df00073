#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "uqf/rng.hpp"
#include "uqf/tensor.hpp"

namespace uqf {

// Activations of image layers use [height, width, channels] layout.

struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Tensor weight;  // [out_dim, in_dim]
  Tensor bias;    // [out_dim]
};

struct Conv2dLayer {
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;  // zeros on every side
  Tensor kernel;            // [kernel_h, kernel_w, in_ch, out_ch]
  Tensor bias;              // [out_ch]
};

struct ReluLayer {};

struct MaxPool2dLayer {
  std::size_t window = 2;
  std::size_t stride = 2;
};

struct FlattenLayer {};
struct SoftmaxLayer {};

struct DropoutLayer {
  float rate = 0.5f;  // drop probability, in (0, 1)
};

using Layer = std::variant<DenseLayer, Conv2dLayer, ReluLayer, MaxPool2dLayer, FlattenLayer, SoftmaxLayer, DropoutLayer>;

enum class LayerKind { dense, conv2d, relu, maxpool2d, flatten, softmax, dropout };

LayerKind kind_of(const Layer& layer);
std::string_view kind_name(LayerKind kind);
std::optional<LayerKind> parse_kind(std::string_view name);

/// Weight tensors of a layer in storage order (empty for parameter-free layers).
std::vector<const Tensor*> layer_parameters(const Layer& layer);
std::vector<Tensor*> layer_parameters(Layer& layer);

/// Per-layer parameter gradients, parallel to layer_parameters().
using ParamGrads = std::vector<std::vector<Tensor>>;

/// Ordered layer stack ending in softmax. Immutable once built, except through
/// apply_update(), which the trainer uses on its own copy.
class Network {
 public:
  /// Validates shapes layer by layer; throws ShapeError or ConfigError naming the layer.
  Network(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t class_count() const noexcept { return class_count_; }
  /// Output shape of each layer (same length as layers()).
  const std::vector<Shape>& output_shapes() const noexcept { return output_shapes_; }
  const Shape& input_shape_of(std::size_t layer) const;

  bool has_dropout() const;
  std::size_t parameter_count() const;
  std::string summary() const;

  /// Copy with one dropout layer inserted immediately before the final dense layer.
  Network with_dropout_before_last_dense(float rate) const;

  /// w -= lr * grad for every parameter.
  void apply_update(const ParamGrads& grads, float lr);

  ParamGrads zero_grads() const;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> output_shapes_;
  std::size_t class_count_ = 0;
};

std::string describe_layer(const Network& net, std::size_t index);

/// Deterministic forward pass; dropout layers are the identity.
Tensor forward(const Network& net, const Tensor& x);
/// Pre-softmax activations of the deterministic pass.
Tensor logits(const Network& net, const Tensor& x);
/// Lowest index attaining the maximum of forward(net, x).
std::size_t predict_label(const Network& net, const Tensor& x);

enum class MaskPolicy {
  sample,    // Bernoulli(1 - rate) keep mask per element
  keep_all,  // every unit kept (still scaled by 1 / (1 - rate)); test hook
};

struct McOptions {
  /// With no dropout layer in the network, drop before the final dense layer.
  bool auto_insert_dropout = true;
  float auto_dropout_rate = 0.5f;
  MaskPolicy mask = MaskPolicy::sample;
};

/// Runs the deterministic prefix of a network once, so repeated MC passes only
/// re-run the layers from the first dropout site on.
class McSampler {
 public:
  McSampler(const Network& net, const Tensor& x, const McOptions& options = {});

  /// One stochastic pass. Consumes rng in layer order.
  Tensor sample(RngStream& rng) const;

  std::size_t first_site() const noexcept { return first_site_; }

 private:
  struct Site {
    std::size_t layer;  // mask applies to this layer's input
    float rate;
  };

  const Network* net_;
  McOptions options_;
  std::vector<Site> sites_;
  std::size_t first_site_ = 0;
  Tensor prefix_;
};

/// Inverted-dropout forward pass.
Tensor forward_mc(const Network& net, const Tensor& x, RngStream& rng, const McOptions& options = {});

struct LossGradients {
  double loss = 0.0;  // cross-entropy, nats
  Tensor input_grad;
  ParamGrads param_grads;  // empty unless requested
  Tensor probabilities;
};

/// Cross-entropy of softmax output against `label` and its gradients.
/// With a non-null `dropout_rng`, dropout layers sample masks (training mode).
LossGradients loss_gradients(const Network& net, const Tensor& x, std::size_t label, RngStream* dropout_rng = nullptr,
                             bool with_params = false);

/// Gradient of the cross-entropy loss with respect to the input, deterministic mode.
Tensor backward(const Network& net, const Tensor& x, std::size_t true_label);

double cross_entropy(const Network& net, const Tensor& x, std::size_t label, RngStream* dropout_rng = nullptr);

/// Numerically stable softmax, computed in double and rounded to float.
Tensor softmax(std::span<const float> logits);

}  // namespace uqf
