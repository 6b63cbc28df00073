#include "uqf/fixtures.hpp"

#include <cmath>

#include "uqf/train.hpp"

namespace uqf {

namespace {

// Deterministic weight pattern; values are exactly representable decimals
// rounded to float, stored verbatim in assets/fixtures/*.pnf.
Tensor patterned(Shape shape, float phase, float amplitude) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = amplitude * std::sin(0.7 * static_cast<double>(i + 1) + phase);
    t[i] = static_cast<float>(std::round(v * 1000.0) / 1000.0);
  }
  return t;
}

}  // namespace

Network fixture_linear2() {
  DenseLayer d{2, 2, Tensor({2, 2}, {1.0f, -1.0f, -0.5f, 0.5f}), Tensor({2}, {0.1f, -0.1f})};
  return Network({2}, {d, SoftmaxLayer{}});
}

Network fixture_mlp() {
  DenseLayer h{4, 6, patterned({6, 4}, 0.3f, 1.2f), patterned({6}, 1.1f, 0.2f)};
  DenseLayer o{6, 3, patterned({3, 6}, 2.0f, 1.5f), patterned({3}, 0.4f, 0.1f)};
  return Network({4}, {h, ReluLayer{}, DropoutLayer{0.5f}, o, SoftmaxLayer{}});
}

Network fixture_conv() {
  Conv2dLayer c;
  c.kernel_h = c.kernel_w = 3;
  c.in_ch = 1;
  c.out_ch = 4;
  c.stride = 1;
  c.padding = 1;
  c.kernel = patterned({3, 3, 1, 4}, 0.5f, 0.8f);
  c.bias = patterned({4}, 1.7f, 0.1f);
  DenseLayer h{36, 8, patterned({8, 36}, 0.9f, 0.4f), patterned({8}, 0.2f, 0.1f)};
  DenseLayer o{8, 3, patterned({3, 8}, 1.3f, 1.0f), patterned({3}, 2.2f, 0.1f)};
  return Network({6, 6, 1}, {c, ReluLayer{}, MaxPool2dLayer{2, 2}, FlattenLayer{}, h, ReluLayer{}, DropoutLayer{0.5f},
                             o, SoftmaxLayer{}});
}

std::map<std::string, Network> fixture_models() {
  std::map<std::string, Network> out;
  out.emplace("linear2", fixture_linear2());
  out.emplace("mlp", fixture_mlp());
  out.emplace("conv", fixture_conv());
  return out;
}

Network make_toy_model(ToyArch arch, float dropout_rate, RngStream& rng) {
  std::vector<Layer> layers;
  if (arch == ToyArch::conv) {
    Conv2dLayer c;
    c.kernel_h = c.kernel_w = 3;
    c.in_ch = 1;
    c.out_ch = 8;
    c.stride = 1;
    c.padding = 1;
    c.kernel = Tensor({3, 3, 1, 8});
    c.bias = Tensor({8});
    layers = {c, ReluLayer{}, MaxPool2dLayer{2, 2}, FlattenLayer{},
              DenseLayer{128, 64, Tensor({64, 128}), Tensor({64})}, ReluLayer{}, DropoutLayer{dropout_rate},
              DenseLayer{64, 10, Tensor({10, 64}), Tensor({10})}, SoftmaxLayer{}};
  } else {
    layers = {FlattenLayer{}, DenseLayer{64, 64, Tensor({64, 64}), Tensor({64})}, ReluLayer{}, DropoutLayer{dropout_rate},
              DenseLayer{64, 10, Tensor({10, 64}), Tensor({10})}, SoftmaxLayer{}};
  }
  return initialize_weights(Network({8, 8, 1}, std::move(layers)), rng);
}

}  // namespace uqf
