#pragma once

#include <map>
#include <string>

#include "uqf/network.hpp"
#include "uqf/rng.hpp"

namespace uqf {

/// Small hand-weighted networks used by tests and exported by `export-fixtures`:
///   "linear2" 2-class dense+softmax on a 2-vector,
///   "mlp"     4 -> 6 -> relu -> dropout -> 3,
///   "conv"    6x6x1 conv/pool net with one dropout layer, 3 classes.
std::map<std::string, Network> fixture_models();

Network fixture_linear2();
Network fixture_mlp();
Network fixture_conv();

enum class ToyArch { conv, mlp };

/// Untrained digit classifier for [8,8,1] inputs and 10 classes, He-initialized from rng.
Network make_toy_model(ToyArch arch, float dropout_rate, RngStream& rng);

}  // namespace uqf
