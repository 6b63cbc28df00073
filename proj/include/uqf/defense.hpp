#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uqf/network.hpp"
#include "uqf/rng.hpp"
#include "uqf/train.hpp"

namespace uqf {

/// Every detector flags an input when score > threshold.
struct DetectorVerdict {
  std::string sample_id;
  double score = 0.0;
  bool flagged = false;
  std::string detector;
  double threshold = 0.0;
};

/// Fraction of BEs passed, fraction of AEs flagged, and both over the mixed set.
struct DefenseReport {
  std::string detector;
  std::string dataset;
  std::size_t n_benign = 0;
  std::size_t n_adv = 0;
  double success_benign = 0.0;
  double success_adv = 0.0;
  double success_combined = 0.0;
  double threshold = 0.0;
};

// Mutation-based detection: label change ratio under small uniform noise.

struct MutationOptions {
  std::size_t n_mutations = 100;
  double noise_eps = 0.05;
};

double mutation_score(const Network& net, const Tensor& x, const MutationOptions& opts, RngStream& rng);
DetectorVerdict mutation_detector(const Network& net, const Tensor& x, std::size_t n_mutations, double noise_eps,
                                  double threshold, RngStream& rng);

// Feature squeezing: L1 distance between predictions before and after bit-depth reduction.

/// round(x * (2^b - 1)) / (2^b - 1) per pixel; bit_depth in [1, 7].
Tensor squeeze(const Tensor& x, int bit_depth);
double squeeze_score(const Network& net, const Tensor& x, int bit_depth);
DetectorVerdict squeeze_detector(const Network& net, const Tensor& x, int bit_depth, double threshold);

// Logit-based binary classifier: logistic regression on standardized logits.

class LogitClassifier {
 public:
  /// labels: 0 benign, 1 adversarial; both classes must be present. A
  /// `holdout_fraction` share of the samples (chosen by rng) is kept out of
  /// training to measure accuracy.
  static LogitClassifier train(std::span<const Tensor> features, std::span<const std::size_t> labels,
                               const TrainOptions& options, RngStream& rng, double holdout_fraction = 0.2);

  /// Probability that the feature vector comes from an AE.
  double adversarial_probability(const Tensor& features) const;
  double heldout_accuracy() const noexcept { return heldout_accuracy_; }
  std::size_t feature_count() const noexcept { return mean_.size(); }

 private:
  LogitClassifier(std::vector<double> mean, std::vector<double> scale, Network model, double acc)
      : mean_(std::move(mean)), scale_(std::move(scale)), model_(std::move(model)), heldout_accuracy_(acc) {}
  Tensor standardize(const Tensor& features) const;

  std::vector<double> mean_;
  std::vector<double> scale_;
  Network model_;
  double heldout_accuracy_ = 0.0;
};

DetectorVerdict logit_binary_detector(const LogitClassifier& clf, const Tensor& logit_vector, double threshold = 0.5);

// Protocol.

/// Scores one input. `key` identifies the sample so that per-sample
/// randomness does not depend on evaluation order.
using ScoreFn = std::function<double(const Tensor& x, std::uint64_t key)>;

struct Detector {
  std::string name;
  ScoreFn score;
  double threshold = 0.0;
};

/// Keys used by score_set / evaluate_defense: benign sample i -> i, adversarial j -> kAdvKeyOffset + j.
inline constexpr std::uint64_t kAdvKeyOffset = std::uint64_t{1} << 32;

/// The returned detectors keep a pointer to `net`, which must outlive them.
Detector make_mutation_detector(const Network& net, const MutationOptions& opts, std::uint64_t seed,
                                double threshold);
Detector make_squeeze_detector(const Network& net, int bit_depth, double threshold);
Detector make_logit_detector(const Network& net, LogitClassifier clf, double threshold = 0.5);

std::vector<double> score_set(const ScoreFn& score, std::span<const Tensor> inputs, std::uint64_t key_offset,
                              std::size_t jobs);

std::vector<DetectorVerdict> verdicts_from_scores(std::span<const double> scores, const std::string& detector,
                                                  double threshold, std::string_view id_prefix);

/// Pure aggregation of verdicts; throws ConfigError on an empty set.
DefenseReport aggregate_verdicts(std::span<const DetectorVerdict> benign, std::span<const DetectorVerdict> adversarial,
                                 std::string dataset);

DefenseReport evaluate_defense(const Detector& detector, std::span<const Tensor> benign,
                               std::span<const Tensor> adversarial, std::string dataset, std::size_t jobs = 1);

/// Threshold maximizing combined success on a calibration split. Candidates
/// are every observed score plus one value below all of them; ties go to the
/// lowest candidate.
double calibrate_threshold(std::span<const double> benign_scores, std::span<const double> adversarial_scores);

inline constexpr std::string_view kDefenseHeader =
    "detector,dataset,n_benign,n_adv,success_benign,success_adv,success_combined,threshold";
std::string defense_csv(std::span<const DefenseReport> reports);

}  // namespace uqf
