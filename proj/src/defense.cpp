#include "uqf/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uqf/dataset.hpp"
#include "uqf/error.hpp"
#include "uqf/evaluation.hpp"
#include "uqf/parallel.hpp"

namespace uqf {

namespace {

void check_threshold(double t) {
  if (std::isnan(t)) throw ConfigError("detector threshold must not be NaN");
}

}  // namespace

double mutation_score(const Network& net, const Tensor& x, const MutationOptions& opts, RngStream& rng) {
  if (opts.n_mutations == 0) throw ConfigError("mutation detector needs at least one mutation");
  if (!(opts.noise_eps >= 0.0) || !std::isfinite(opts.noise_eps)) {
    throw ConfigError("mutation noise_eps must be finite and >= 0");
  }
  const std::size_t original = predict_label(net, x);
  std::size_t changed = 0;
  Tensor mutated = x;
  for (std::size_t m = 0; m < opts.n_mutations; ++m) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x[i] + rng.uniform(-opts.noise_eps, opts.noise_eps);
      mutated[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    if (predict_label(net, mutated) != original) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(opts.n_mutations);
}

DetectorVerdict mutation_detector(const Network& net, const Tensor& x, std::size_t n_mutations, double noise_eps,
                                  double threshold, RngStream& rng) {
  check_threshold(threshold);
  const double s = mutation_score(net, x, {n_mutations, noise_eps}, rng);
  return {"", s, s > threshold, "mutation", threshold};
}

Tensor squeeze(const Tensor& x, int bit_depth) {
  if (bit_depth < 1 || bit_depth > 7) throw ConfigError("squeeze bit depth must be in [1, 7]");
  const double levels = static_cast<double>((1 << bit_depth) - 1);
  Tensor out = x;
  for (auto& v : out.values()) v = static_cast<float>(std::round(static_cast<double>(v) * levels) / levels);
  return out;
}

double squeeze_score(const Network& net, const Tensor& x, int bit_depth) {
  const Tensor a = forward(net, x);
  const Tensor b = forward(net, squeeze(x, bit_depth));
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return l1;
}

DetectorVerdict squeeze_detector(const Network& net, const Tensor& x, int bit_depth, double threshold) {
  check_threshold(threshold);
  const double s = squeeze_score(net, x, bit_depth);
  return {"", s, s > threshold, "squeeze", threshold};
}

LogitClassifier LogitClassifier::train(std::span<const Tensor> features, std::span<const std::size_t> labels,
                                       const TrainOptions& options, RngStream& rng, double holdout_fraction) {
  if (features.size() != labels.size()) throw ShapeError("logit classifier: feature and label counts differ");
  if (features.empty()) throw ConfigError("logit classifier: empty training set");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("logit classifier: holdout fraction must be in [0, 1)");
  }
  const std::size_t k = features[0].size();
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != k) throw ShapeError("logit classifier: feature vectors differ in length");
    if (!features[i].all_finite()) throw NumericError("logit classifier: non-finite feature");
    if (labels[i] > 1) throw ConfigError("logit classifier: labels must be 0 (benign) or 1 (adversarial)");
    by_class[labels[i]].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    throw ConfigError("logit classifier: training set must contain both benign and adversarial samples");
  }

  // Stratified split, so both classes stay in the training part. Keys are
  // drawn per sample in index order, so renaming the classes keeps the split.
  std::vector<double> key(features.size());
  for (auto& u : key) u = rng.uniform();
  std::vector<std::size_t> train_idx, hold_idx;
  for (auto& idx : by_class) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    const auto n_hold = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(idx.size())));
    hold_idx.insert(hold_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(hold_idx.begin(), hold_idx.end());

  std::vector<double> mean(k, 0.0), scale(k, 0.0);
  for (std::size_t i : train_idx)
    for (std::size_t j = 0; j < k; ++j) mean[j] += features[i][j];
  for (auto& m : mean) m /= static_cast<double>(train_idx.size());
  for (std::size_t i : train_idx)
    for (std::size_t j = 0; j < k; ++j) scale[j] += (features[i][j] - mean[j]) * (features[i][j] - mean[j]);
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(train_idx.size()));
    if (s < 1e-12) s = 1.0;
  }

  DenseLayer dense{k, 2, Tensor({2, k}, 0.0f), Tensor({2}, 0.0f)};
  Network model({k}, {dense, SoftmaxLayer{}});
  LogitClassifier clf(std::move(mean), std::move(scale), model, 0.0);

  std::vector<Tensor> xs;
  std::vector<std::size_t> ys;
  for (std::size_t i : train_idx) {
    xs.push_back(clf.standardize(features[i]));
    ys.push_back(labels[i]);
  }
  TrainOptions opts = options;
  opts.dropout_active = false;
  auto trained = sgd_train(model, LabeledDataset::from_samples(xs, ys, "logit features"), opts, rng);
  clf.model_ = std::move(trained.net);

  const auto& eval_idx = hold_idx.empty() ? train_idx : hold_idx;
  std::size_t correct = 0;
  for (std::size_t i : eval_idx) {
    const bool adv = clf.adversarial_probability(features[i]) > 0.5;
    if (adv == (labels[i] == 1)) ++correct;
  }
  clf.heldout_accuracy_ = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
  return clf;
}

Tensor LogitClassifier::standardize(const Tensor& features) const {
  if (features.size() != mean_.size()) {
    throw ShapeError("logit classifier expects " + std::to_string(mean_.size()) + " features, got " +
                     std::to_string(features.size()));
  }
  Tensor out({mean_.size()}, 0.0f);
  for (std::size_t j = 0; j < mean_.size(); ++j) {
    out[j] = static_cast<float>((features[j] - mean_[j]) / scale_[j]);
  }
  return out;
}

double LogitClassifier::adversarial_probability(const Tensor& features) const {
  return forward(model_, standardize(features))[1];
}

DetectorVerdict logit_binary_detector(const LogitClassifier& clf, const Tensor& logit_vector, double threshold) {
  check_threshold(threshold);
  const double s = clf.adversarial_probability(logit_vector);
  return {"", s, s > threshold, "logit", threshold};
}

Detector make_mutation_detector(const Network& net, const MutationOptions& opts, std::uint64_t seed,
                                double threshold) {
  check_threshold(threshold);
  const Network* n = &net;
  return {"mutation",
          [n, opts, seed](const Tensor& x, std::uint64_t key) {
            RngStream rng(seed, derive_stream_id(0x6d7574, key));
            return mutation_score(*n, x, opts, rng);
          },
          threshold};
}

Detector make_squeeze_detector(const Network& net, int bit_depth, double threshold) {
  check_threshold(threshold);
  squeeze(Tensor({1}, 0.0f), bit_depth);  // validates bit_depth
  const Network* n = &net;
  return {"squeeze", [n, bit_depth](const Tensor& x, std::uint64_t) { return squeeze_score(*n, x, bit_depth); },
          threshold};
}

Detector make_logit_detector(const Network& net, LogitClassifier clf, double threshold) {
  check_threshold(threshold);
  const Network* n = &net;
  return {"logit",
          [n, clf = std::move(clf)](const Tensor& x, std::uint64_t) {
            return clf.adversarial_probability(logits(*n, x));
          },
          threshold};
}

std::vector<double> score_set(const ScoreFn& score, std::span<const Tensor> inputs, std::uint64_t key_offset,
                              std::size_t jobs) {
  std::vector<double> out(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) { out[i] = score(inputs[i], key_offset + i); });
  return out;
}

std::vector<DetectorVerdict> verdicts_from_scores(std::span<const double> scores, const std::string& detector,
                                                  double threshold, std::string_view id_prefix) {
  check_threshold(threshold);
  std::vector<DetectorVerdict> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({std::string(id_prefix) + std::to_string(i), scores[i], scores[i] > threshold, detector, threshold});
  }
  return out;
}

DefenseReport aggregate_verdicts(std::span<const DetectorVerdict> benign, std::span<const DetectorVerdict> adversarial,
                                 std::string dataset) {
  if (benign.empty() || adversarial.empty()) throw ConfigError("defense evaluation needs non-empty benign and adversarial sets");
  DefenseReport r;
  r.detector = benign.front().detector;
  r.dataset = std::move(dataset);
  r.threshold = benign.front().threshold;
  r.n_benign = benign.size();
  r.n_adv = adversarial.size();
  std::size_t passed = 0, caught = 0;
  for (const auto& v : benign) passed += v.flagged ? 0 : 1;
  for (const auto& v : adversarial) caught += v.flagged ? 1 : 0;
  r.success_benign = static_cast<double>(passed) / static_cast<double>(r.n_benign);
  r.success_adv = static_cast<double>(caught) / static_cast<double>(r.n_adv);
  r.success_combined = static_cast<double>(passed + caught) / static_cast<double>(r.n_benign + r.n_adv);
  return r;
}

DefenseReport evaluate_defense(const Detector& detector, std::span<const Tensor> benign,
                               std::span<const Tensor> adversarial, std::string dataset, std::size_t jobs) {
  if (benign.empty() || adversarial.empty()) throw ConfigError("defense evaluation needs non-empty benign and adversarial sets");
  const auto sb = score_set(detector.score, benign, 0, jobs);
  const auto sa = score_set(detector.score, adversarial, kAdvKeyOffset, jobs);
  const auto vb = verdicts_from_scores(sb, detector.name, detector.threshold, "benign-");
  const auto va = verdicts_from_scores(sa, detector.name, detector.threshold, "adv-");
  return aggregate_verdicts(vb, va, std::move(dataset));
}

double calibrate_threshold(std::span<const double> benign_scores, std::span<const double> adversarial_scores) {
  if (benign_scores.empty() || adversarial_scores.empty()) {
    throw ConfigError("threshold calibration needs non-empty benign and adversarial scores");
  }
  std::vector<double> candidates(benign_scores.begin(), benign_scores.end());
  candidates.insert(candidates.end(), adversarial_scores.begin(), adversarial_scores.end());
  for (double c : candidates)
    if (!std::isfinite(c)) throw NumericError("calibration scores must be finite");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  candidates.insert(candidates.begin(), candidates.front() - 1.0);

  double best_t = candidates.front();
  std::size_t best = 0;
  for (double t : candidates) {
    std::size_t ok = 0;
    for (double s : benign_scores) ok += s > t ? 0 : 1;
    for (double s : adversarial_scores) ok += s > t ? 1 : 0;
    if (ok > best) {
      best = ok;
      best_t = t;
    }
  }
  return best_t;
}

std::string defense_csv(std::span<const DefenseReport> reports) {
  std::string out(kDefenseHeader);
  out += '\n';
  for (const auto& r : reports) {
    out += r.detector + ',' + r.dataset + ',' + std::to_string(r.n_benign) + ',' + std::to_string(r.n_adv) + ',' +
           format_real(r.success_benign) + ',' + format_real(r.success_adv) + ',' + format_real(r.success_combined) +
           ',' + format_real(r.threshold) + '\n';
  }
  return out;
}

}  // namespace uqf
