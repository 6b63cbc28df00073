#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "uqf/network.hpp"
#include "uqf/rng.hpp"

namespace uqf {

/// Outputs of T MC-dropout passes plus the deterministic pass for one input.
struct McRecord {
  std::vector<Tensor> distributions;  // T probability vectors
  std::vector<std::size_t> labels;    // argmax of each pass, lowest index on ties
  std::size_t original_label = 0;     // argmax of the deterministic pass
  Tensor original_distribution;

  std::size_t passes() const noexcept { return distributions.size(); }

  /// Derives labels and original_label from the given vectors.
  static McRecord from_distributions(std::vector<Tensor> passes, Tensor original);
};

struct UncertaintyProfile {
  double pcs = 0.0;
  double vr = 0.0;
  double vro = 0.0;
  double pe = 0.0;  // nats
  double mi = 0.0;  // nats
  std::size_t dominant_label = 0;
  std::size_t original_label = 0;
  std::size_t passes = 0;
};

struct PatternThresholds {
  double p_low = 0.3;
  double p_high = 0.7;
  double v_low = 0.4;
  double v_high = 0.6;

  /// Throws ConfigError unless p_low < p_high and v_low < v_high.
  void validate() const;
};

enum class PatternLabel { HL, LH, LL, HH, MID };

std::string_view pattern_name(PatternLabel p);
std::optional<PatternLabel> parse_pattern(std::string_view name);

/// Pass-count presets: 50 for MNIST-scale inputs, 100 for CIFAR-10 / ImageNet.
inline constexpr std::size_t kPassesMnist = 50;
inline constexpr std::size_t kPassesCifar = 100;
inline constexpr std::size_t kPassesImagenet = 100;

/// Gap between the largest and second-largest probability.
double pcs(std::span<const float> probabilities);

McRecord mc_execute(const Network& net, const Tensor& x, std::size_t passes, RngStream& rng,
                    const McOptions& options = {});

/// Most frequent MC label; ties go to the lowest class index.
std::size_t dominant_label(const McRecord& rec);
double vr(const McRecord& rec);
double vro(const McRecord& rec);
double pe(const McRecord& rec);
double mi(const McRecord& rec);

UncertaintyProfile profile_from_record(const McRecord& rec);
UncertaintyProfile profile(const Network& net, const Tensor& x, std::size_t passes, RngStream& rng,
                           const McOptions& options = {});

/// Profiles every input; input i uses RngStream(base_seed, i), so results do
/// not depend on `jobs`.
std::vector<UncertaintyProfile> profile_batch(const Network& net, const std::vector<Tensor>& inputs,
                                              std::size_t passes, std::uint64_t base_seed, std::size_t jobs,
                                              const McOptions& options = {});

PatternLabel categorize(double pcs_value, double vro_value, const PatternThresholds& t);
PatternLabel categorize(const UncertaintyProfile& p, const PatternThresholds& t);

}  // namespace uqf
