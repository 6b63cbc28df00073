#pragma once

#include <string>
#include <utility>
#include <vector>

#include "uqf/network.hpp"
#include "uqf/rng.hpp"

namespace testnets {

using namespace uqf;

inline Tensor random_input(const Shape& shape, RngStream& r) {
  Tensor t(shape);
  for (auto& v : t.values()) v = static_cast<float>(r.uniform());
  return t;
}

inline Tensor random_tensor(const Shape& shape, RngStream& r, double amp) {
  Tensor t(shape);
  for (auto& v : t.values()) v = static_cast<float>(r.uniform(-amp, amp));
  return t;
}

// Small random networks, one per layer kind under test.
inline std::vector<std::pair<std::string, Network>> kind_nets(RngStream& r) {
  std::vector<std::pair<std::string, Network>> out;
  out.emplace_back("dense", Network({5}, {DenseLayer{5, 4, random_tensor({4, 5}, r, 1.0), random_tensor({4}, r, 0.2)},
                                          SoftmaxLayer{}}));
  Conv2dLayer c;
  c.kernel_h = 3;
  c.kernel_w = 2;
  c.in_ch = 2;
  c.out_ch = 3;
  c.stride = 2;
  c.padding = 1;
  c.kernel = random_tensor({3, 2, 2, 3}, r, 0.8);
  c.bias = random_tensor({3}, r, 0.2);
  out.emplace_back("conv2d+flatten",
                   Network({5, 5, 2}, {c, FlattenLayer{}, DenseLayer{27, 3, random_tensor({3, 27}, r, 0.5),
                                                                     random_tensor({3}, r, 0.1)},
                                       SoftmaxLayer{}}));
  out.emplace_back("relu", Network({6}, {DenseLayer{6, 8, random_tensor({8, 6}, r, 1.0), random_tensor({8}, r, 0.3)},
                                         ReluLayer{},
                                         DenseLayer{8, 3, random_tensor({3, 8}, r, 1.0), random_tensor({3}, r, 0.1)},
                                         SoftmaxLayer{}}));
  Conv2dLayer c2 = c;
  c2.kernel_w = 3;
  c2.stride = 1;
  c2.kernel = random_tensor({3, 3, 2, 3}, r, 0.8);
  out.emplace_back("maxpool2d",
                   Network({5, 5, 2}, {c2, MaxPool2dLayer{2, 1}, FlattenLayer{},
                                       DenseLayer{48, 4, random_tensor({4, 48}, r, 0.4), random_tensor({4}, r, 0.1)},
                                       SoftmaxLayer{}}));
  out.emplace_back("dropout", Network({6}, {DenseLayer{6, 8, random_tensor({8, 6}, r, 1.0), random_tensor({8}, r, 0.3)},
                                            ReluLayer{}, DropoutLayer{0.3f},
                                            DenseLayer{8, 3, random_tensor({3, 8}, r, 1.0), random_tensor({3}, r, 0.1)},
                                            SoftmaxLayer{}}));
  return out;
}

}  // namespace testnets
