#include "uqf/train.hpp"

#include <cmath>
#include <numeric>

#include "uqf/error.hpp"
#include "uqf/kernels.hpp"

namespace uqf {

double accuracy(const Network& net, const LabeledDataset& data) {
  if (data.size() == 0) throw ConfigError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += predict_label(net, data.sample(i)) == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult sgd_train(Network net, const LabeledDataset& data, const TrainOptions& options, RngStream& rng) {
  if (data.size() == 0) throw ConfigError("cannot train on an empty dataset");
  if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!std::isfinite(options.lr) || options.lr < 0.0f) throw ConfigError("learning rate must be finite and >= 0");
  data.validate(net.class_count());
  if (data.sample_shape() != net.input_shape()) {
    throw ShapeError("dataset sample shape " + shape_to_string(data.sample_shape()) + " does not match network input " +
                     shape_to_string(net.input_shape()));
  }

  TrainResult result{net, {}, 0.0};
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    // Fisher-Yates with our own index draws keeps the order platform independent.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      ParamGrads acc = net.zero_grads();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        auto lg = loss_gradients(net, data.sample(idx), data.labels[idx], options.dropout_active ? &rng : nullptr, true);
        loss_sum += lg.loss;
        for (std::size_t l = 0; l < acc.size(); ++l) {
          for (std::size_t p = 0; p < acc[l].size(); ++p) kernels::axpy(1.0f, lg.param_grads[l][p].values(), acc[l][p].values());
        }
      }
      net.apply_update(acc, options.lr / static_cast<float>(end - start));
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  result.train_accuracy = accuracy(net, data);
  result.net = std::move(net);
  return result;
}

Network initialize_weights(Network net, RngStream& rng) {
  std::vector<Layer> layers = net.layers();
  for (auto& layer : layers) {
    std::size_t fan_in = 0;
    Tensor* weight = nullptr;
    Tensor* bias = nullptr;
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      fan_in = d->in_dim;
      weight = &d->weight;
      bias = &d->bias;
    } else if (auto* c = std::get_if<Conv2dLayer>(&layer)) {
      fan_in = c->kernel_h * c->kernel_w * c->in_ch;
      weight = &c->kernel;
      bias = &c->bias;
    } else {
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& w : weight->values()) w = static_cast<float>(rng.uniform(-limit, limit));
    for (auto& b : bias->values()) b = 0.0f;
  }
  return Network(net.input_shape(), std::move(layers));
}

}  // namespace uqf
