#pragma once

#include <cstddef>
#include <vector>

#include "uqf/dataset.hpp"
#include "uqf/network.hpp"
#include "uqf/rng.hpp"

namespace uqf {

struct TrainOptions {
  std::size_t epochs = 10;
  float lr = 0.05f;
  std::size_t batch_size = 1;
  /// Sample dropout masks during training.
  bool dropout_active = true;
};

struct TrainResult {
  Network net;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  double train_accuracy = 0.0;     // deterministic-mode accuracy after the last epoch
};

/// Minibatch SGD on softmax cross-entropy. Samples are reshuffled each epoch from `rng`.
TrainResult sgd_train(Network net, const LabeledDataset& data, const TrainOptions& options, RngStream& rng);

double accuracy(const Network& net, const LabeledDataset& data);

/// He-uniform initialization of every dense/conv weight; biases set to zero.
Network initialize_weights(Network net, RngStream& rng);

}  // namespace uqf
