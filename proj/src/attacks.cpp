#include "uqf/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "uqf/error.hpp"

namespace uqf {

namespace {

float sign(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

AdversarialResult finish(const Network& net, const Tensor& seed, Tensor adv, std::size_t true_label,
                         std::size_t iterations) {
  AdversarialResult r;
  r.adversarial_label = predict_label(net, adv);
  r.success = r.adversarial_label != true_label;
  r.linf = linf_distance(adv, seed);
  r.original_label = true_label;
  r.iterations = iterations;
  r.image = std::move(adv);
  return r;
}

}  // namespace

std::string_view attack_name(AttackMethod m) { return m == AttackMethod::fgsm ? "fgsm" : "bim"; }

std::optional<AttackMethod> parse_attack(std::string_view name) {
  if (name == "fgsm") return AttackMethod::fgsm;
  if (name == "bim") return AttackMethod::bim;
  return std::nullopt;
}

AttackConfig AttackConfig::defaults(AttackMethod method, float epsilon) {
  return {method, epsilon, 10, epsilon / 10.0f, 0};
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0f && epsilon <= 1.0f)) throw ConfigError("attack epsilon must be in [0,1]");
  if (method == AttackMethod::bim) {
    if (epsilon <= 0.0f) throw ConfigError("BIM epsilon must be positive");
    if (bim_steps < 1) throw ConfigError("bim_steps must be at least 1");
    if (!(bim_step_size > 0.0f && bim_step_size <= epsilon)) {
      throw ConfigError("bim_step_size must be in (0, epsilon]");
    }
  }
}

AdversarialResult fgsm(const Network& net, const Tensor& x, std::size_t true_label, const AttackConfig& cfg) {
  cfg.validate();
  const Tensor grad = backward(net, x, true_label);
  auto step = [&](float eps) {
    Tensor adv = x;
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = std::clamp(x[i] + eps * sign(grad[i]), 0.0f, 1.0f);
    return adv;
  };
  if (cfg.epsilon_search_steps == 0) return finish(net, x, step(cfg.epsilon), true_label, 1);
  const std::size_t n = cfg.epsilon_search_steps;
  for (std::size_t k = 1; k <= n; ++k) {
    const float eps = k == n ? cfg.epsilon : cfg.epsilon * static_cast<float>(k) / static_cast<float>(n);
    Tensor adv = step(eps);
    if (k == n || predict_label(net, adv) != true_label) return finish(net, x, std::move(adv), true_label, k);
  }
  return finish(net, x, x, true_label, 0);
}

AdversarialResult bim(const Network& net, const Tensor& x, std::size_t true_label, const AttackConfig& cfg) {
  cfg.validate();
  Tensor adv = x;
  std::size_t it = 0;
  while (it < cfg.bim_steps) {
    const Tensor grad = backward(net, adv, true_label);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const float stepped = std::clamp(adv[i] + cfg.bim_step_size * sign(grad[i]), 0.0f, 1.0f);
      adv[i] = std::clamp(stepped, x[i] - cfg.epsilon, x[i] + cfg.epsilon);
    }
    ++it;
    if (predict_label(net, adv) != true_label) break;
  }
  return finish(net, x, std::move(adv), true_label, it);
}

AdversarialResult run_attack(const Network& net, const Tensor& x, std::size_t true_label, const AttackConfig& cfg) {
  return cfg.method == AttackMethod::fgsm ? fgsm(net, x, true_label, cfg) : bim(net, x, true_label, cfg);
}

}  // namespace uqf
