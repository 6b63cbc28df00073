#pragma once

#include <cstddef>
#include <string_view>
#include <optional>

#include "uqf/network.hpp"

namespace uqf {

enum class AttackMethod { fgsm, bim };

std::string_view attack_name(AttackMethod m);
std::optional<AttackMethod> parse_attack(std::string_view name);

/// Untargeted L-infinity gradient-sign attack settings.
struct AttackConfig {
  AttackMethod method = AttackMethod::fgsm;
  float epsilon = 0.3f;
  std::size_t bim_steps = 10;
  float bim_step_size = 0.03f;
  /// FGSM only. 0: one step of size epsilon. N > 0: try step sizes
  /// epsilon * k / N for k = 1..N and keep the first that flips the label.
  std::size_t epsilon_search_steps = 0;

  /// BIM defaults: 10 steps of epsilon / 10.
  static AttackConfig defaults(AttackMethod method, float epsilon);
  void validate() const;
};

struct AdversarialResult {
  Tensor image;
  std::size_t seed_index = 0;
  bool success = false;
  float linf = 0.0f;
  std::size_t original_label = 0;  // the seed's true label
  std::size_t adversarial_label = 0;
  std::size_t iterations = 0;
};

/// x' = clip01(x + epsilon * sign(grad_x CE(net(x), true_label))).
/// With epsilon_search_steps > 0 the smallest flipping step on the grid is used.
AdversarialResult fgsm(const Network& net, const Tensor& x, std::size_t true_label, const AttackConfig& cfg);

/// Iterated FGSM with step bim_step_size, projected onto the epsilon ball and
/// [0,1] after each step. Stops as soon as the label flips.
AdversarialResult bim(const Network& net, const Tensor& x, std::size_t true_label, const AttackConfig& cfg);

AdversarialResult run_attack(const Network& net, const Tensor& x, std::size_t true_label, const AttackConfig& cfg);

}  // namespace uqf
