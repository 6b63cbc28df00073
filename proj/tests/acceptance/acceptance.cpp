// Acceptance runner: one PASS/FAIL line per criterion. With arguments, runs
// only the named criteria. Exit status is non-zero if any selected one fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../support/gradcheck.hpp"
#include "../support/nets.hpp"
#include "../support/oracles.hpp"
#include "uqf/attacks.hpp"
#include "uqf/dataset_io.hpp"
#include "uqf/defense.hpp"
#include "uqf/evaluation.hpp"
#include "uqf/ga.hpp"
#include "uqf/model_io.hpp"
#include "uqf/uncertainty.hpp"

using namespace uqf;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and bounds.
constexpr double kMetricTol = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr std::size_t kGradCoords = 100;
constexpr double kAucTol = 1e-12;
constexpr double kFitnessTol = 1e-12;

constexpr std::size_t kBenignCount = 200;
constexpr float kFgsmEps = 0.3f;
constexpr std::size_t kFgsmSearch = 100;
constexpr std::size_t kPasses = 50;
constexpr std::uint64_t kBenignSeed = 7;
constexpr std::uint64_t kAdvSeed = 8;

constexpr double kAucPcsMin = 0.90;
constexpr double kAucVroMin = 0.85;
constexpr double kAucOrderSlack = 0.02;

constexpr std::size_t kGaRunsPerTarget = 10;
constexpr std::size_t kGenerationSeeds = 20;
constexpr std::uint64_t kGaSeedBase = 1000;
constexpr std::size_t kDefenseHlSeeds = 40;
constexpr double kMutationGapMin = 0.20;

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared toy-model data: BEs from the bundled test split and their FGSM AEs.

struct ToyData {
  Network net;
  std::vector<Tensor> benign, adversarial;
  std::vector<std::size_t> benign_labels;
  std::vector<Tensor> calib_benign, calib_adversarial;
  std::vector<UncertaintyProfile> benign_profiles, adversarial_profiles;
};

const ToyData& toy() {
  static const ToyData data = [] {
    ToyData d{load_model(fs::path(UQF_ASSET_DIR) / "toy" / "digits-conv.pnf"), {}, {}, {}, {}, {}, {}, {}};
    const fs::path dir(UQF_DATA_DIR);
    const auto test = load_idx(dir / "digits-test-images.idx", dir / "digits-test-labels.idx");
    AttackConfig cfg;
    cfg.epsilon = kFgsmEps;
    cfg.epsilon_search_steps = kFgsmSearch;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto x = test.sample(i);
      if (predict_label(d.net, x) != test.labels[i]) continue;
      const auto a = fgsm(d.net, x, test.labels[i], cfg);
      if (d.benign.size() < kBenignCount) {
        d.benign.push_back(x);
        d.benign_labels.push_back(test.labels[i]);
        if (a.success) d.adversarial.push_back(a.image);
      } else {
        d.calib_benign.push_back(x);
        if (a.success) d.calib_adversarial.push_back(a.image);
      }
    }
    d.benign_profiles = profile_batch(d.net, d.benign, kPasses, kBenignSeed, jobs());
    d.adversarial_profiles = profile_batch(d.net, d.adversarial, kPasses, kAdvSeed, jobs());
    return d;
  }();
  return data;
}

double mean_of(const std::vector<UncertaintyProfile>& ps, Metric m) {
  double s = 0.0;
  for (const auto& p : ps) s += metric_value(p, m);
  return s / static_cast<double>(ps.size());
}

// ---------------------------------------------------------------------------

Tensor one_hot(std::size_t classes, std::size_t k) {
  Tensor t({classes}, 0.0f);
  t[k] = 1.0f;
  return t;
}

McRecord label_record(std::size_t classes, std::vector<std::size_t> labels, std::size_t original) {
  std::vector<Tensor> d;
  for (auto l : labels) d.push_back(one_hot(classes, l));
  return McRecord::from_distributions(std::move(d), one_hot(classes, original));
}

Outcome metric_identity() {
  struct Example {
    std::string name;
    double got, want;
  };
  std::vector<Example> ex;
  const std::vector<float> p1{1.0f, 0.0f, 0.0f}, p2{0.5f, 0.5f}, p3{0.6f, 0.3f, 0.1f};
  ex.push_back({"pcs one-hot", pcs(p1), 1.0});
  ex.push_back({"pcs tie", pcs(p2), 0.0});
  // the inputs are float, so the expected gap is that of the stored values
  ex.push_back({"pcs 0.6/0.3", pcs(p3), static_cast<double>(0.6f) - static_cast<double>(0.3f)});
  ex.push_back({"vr aaaa", vr(label_record(3, {0, 0, 0, 0}, 0)), 0.0});
  ex.push_back({"vr aaab", vr(label_record(3, {0, 0, 0, 1}, 0)), 0.25});
  ex.push_back({"vr aabb", vr(label_record(3, {2, 2, 1, 1}, 2)), 0.5});
  ex.push_back({"vr aabb dominant", static_cast<double>(dominant_label(label_record(3, {2, 2, 1, 1}, 2))), 1.0});
  ex.push_back({"vro aaaa", vro(label_record(3, {0, 0, 0, 0}, 0)), 0.0});
  ex.push_back({"vro bbbb", vro(label_record(3, {1, 1, 1, 1}, 0)), 1.0});
  ex.push_back({"vr bbbb", vr(label_record(3, {1, 1, 1, 1}, 0)), 0.0});
  ex.push_back({"vro abab", vro(label_record(3, {0, 1, 0, 1}, 0)), 0.5});
  ex.push_back({"pe one-hot", pe(label_record(3, {2, 2, 2}, 2)), 0.0});
  const auto uniform = McRecord::from_distributions(std::vector<Tensor>(5, Tensor({10}, 0.1f)), Tensor({10}, 0.1f));
  ex.push_back({"pe uniform", pe(uniform), std::log(10.0)});
  ex.push_back({"pe split", pe(label_record(2, {0, 1}, 0)), std::log(2.0)});
  ex.push_back({"mi identical", mi(uniform), 0.0});
  ex.push_back({"mi split", mi(label_record(2, {0, 1}, 0)), std::log(2.0)});
  ex.push_back({"T=1 passes", static_cast<double>(label_record(3, {1}, 1).passes()), 1.0});

  std::string failed;
  double worst = 0.0;
  for (const auto& e : ex) {
    const double err = std::abs(e.got - e.want);
    worst = std::max(worst, err);
    if (err > kMetricTol) failed += " " + e.name;
  }

  RngStream r(101, 0);
  std::size_t violations = 0;
  for (int n = 0; n < 1000; ++n) {
    const std::size_t classes = 2 + r.uniform_index(9);
    const auto p = profile_from_record(oracle::random_record(r, classes, 1 + r.uniform_index(60)));
    const bool ok = p.vr <= p.vro && p.mi >= 0.0 && p.mi <= p.pe + kMetricTol &&
                    p.pe <= std::log(static_cast<double>(classes)) + kMetricTol;
    violations += !ok;
  }
  Outcome o;
  o.pass = failed.empty() && violations == 0;
  o.detail = std::to_string(ex.size()) + " examples, worst error " + fmt("%.2g", worst) + " (tol 1e-9)" +
             (failed.empty() ? "" : ", failed:" + failed) + "; 1000 random records, " + std::to_string(violations) +
             " property violations";
  return o;
}

Outcome gradients() {
  RngStream r(102, 0), pick(102, 1);
  double worst = 0.0;
  std::string detail;
  bool pass = true;
  for (const auto& [name, net] : testnets::kind_nets(r)) {
    const auto x = testnets::random_input(net.input_shape(), r);
    const std::size_t label = r.uniform_index(net.class_count());
    RngStream drop(103, 0);
    const bool has_dropout = net.has_dropout();
    const auto masks = oracle::masks_from(net, drop);
    const auto* mp = has_dropout ? &masks : nullptr;
    const auto lg = loss_gradients(net, x, label, has_dropout ? &drop : nullptr, true);
    const auto in = oracle::check_input_gradient(net, x, label, lg.input_grad, mp, kGradCoords, pick);

    // parameter coordinates, perturbing the float weights of a copy
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t li = 0; li < net.layers().size(); ++li)
      for (std::size_t pi = 0; pi < layer_parameters(net.layers()[li]).size(); ++pi) slots.emplace_back(li, pi);
    const auto xv = oracle::to_vec(x);
    double worst_param = 0.0;
    std::size_t checked = 0, attempts = 0;
    while (checked < kGradCoords && attempts < kGradCoords * 20) {
      ++attempts;
      const auto [li, pi] = slots[pick.uniform_index(slots.size())];
      const auto* param = layer_parameters(net.layers()[li])[pi];
      const std::size_t idx = pick.uniform_index(param->size());
      auto shifted = [&](double delta) {
        auto layers = net.layers();
        (*layer_parameters(layers[li])[pi])[idx] += static_cast<float>(delta);
        return Network(net.input_shape(), layers);
      };
      const auto np = shifted(1e-3), nm = shifted(-1e-3);
      if (oracle::kink_pattern(np, xv, mp) != oracle::kink_pattern(nm, xv, mp)) continue;
      const double hp = (*layer_parameters(np.layers()[li])[pi])[idx] - (*param)[idx];
      const double hm = (*param)[idx] - (*layer_parameters(nm.layers()[li])[pi])[idx];
      const double fd = (oracle::loss(np, xv, label, mp) - oracle::loss(nm, xv, label, mp)) / (hp + hm);
      worst_param = std::max(worst_param, oracle::relative_error(lg.param_grads[li][pi][idx], fd));
      ++checked;
    }
    const bool ok = in.checked == kGradCoords && checked == kGradCoords && in.worst_rel < kGradRelTol &&
                    worst_param < kGradRelTol;
    pass = pass && ok;
    worst = std::max({worst, in.worst_rel, worst_param});
    detail += " " + name + " " + fmt("%.1e", std::max(in.worst_rel, worst_param));
  }
  return {pass, "worst relative error per net (input and parameters, 100 coords each):" + detail + "; max " +
                    fmt("%.2e", worst) + " < 1e-4"};
}

Outcome auc_oracle() {
  RngStream r(104, 0);
  double worst = 0.0;
  std::size_t ties = 0;
  for (int n = 0; n < 1000; ++n) {
    const bool coarse = n % 2 == 0;  // small integer scores force ties
    auto draw = [&](std::size_t k) {
      std::vector<double> s(k);
      for (auto& v : s) v = coarse ? static_cast<double>(r.uniform_index(8)) : r.normal();
      return s;
    };
    const auto pos = draw(1 + r.uniform_index(200));
    const auto neg = draw(1 + r.uniform_index(200));
    ties += coarse;
    worst = std::max(worst, std::abs(auc_roc(pos, neg) - oracle::pairwise_auc(pos, neg)));
  }
  return {worst < kAucTol, "1000 instances (" + std::to_string(ties) + " with ties), max |sweep - pairwise| = " +
                               fmt("%.2g", worst) + " (tol 1e-12)"};
}

Outcome detection_auc() {
  const auto& d = toy();
  const auto aucs = metric_aucs(d.benign_profiles, d.adversarial_profiles);
  std::map<Metric, double> a;
  std::string detail = "BEs " + std::to_string(d.benign.size()) + ", FGSM AEs " +
                       std::to_string(d.adversarial.size()) + "; AUC";
  for (const auto& m : aucs) {
    a[m.metric] = m.auc;
    detail += " " + std::string(metric_name(m.metric)) + "=" + fixed(m.auc);
  }
  const bool pass = d.benign.size() == kBenignCount && d.adversarial.size() >= kBenignCount * 9 / 10 &&
                    a[Metric::pcs] >= kAucPcsMin && a[Metric::vro] >= kAucVroMin && a[Metric::pcs] >= a[Metric::vro] &&
                    a[Metric::vro] >= a[Metric::vr] - kAucOrderSlack;
  return {pass, detail + " (need pcs>=0.90, vro>=0.85, pcs>=vro>=vr-0.02)"};
}

Outcome pattern_characterization() {
  const auto& d = toy();
  const PatternThresholds t;
  auto share = [&](const std::vector<UncertaintyProfile>& ps, PatternLabel want) {
    std::size_t n = 0;
    for (const auto& p : ps) n += categorize(p, t) == want;
    return static_cast<double>(n) / static_cast<double>(ps.size());
  };
  const double be_pcs = mean_of(d.benign_profiles, Metric::pcs), be_vro = mean_of(d.benign_profiles, Metric::vro);
  const double ae_pcs = mean_of(d.adversarial_profiles, Metric::pcs),
               ae_vro = mean_of(d.adversarial_profiles, Metric::vro);
  const double hl = share(d.benign_profiles, PatternLabel::HL), lh = share(d.adversarial_profiles, PatternLabel::LH);
  const bool pass = be_pcs > 0.7 && be_vro < 0.4 && ae_pcs < 0.3 && ae_vro > be_vro + 0.2 && hl >= 0.6 && lh >= 0.5;
  return {pass, "BE mean pcs " + fixed(be_pcs) + " vro " + fixed(be_vro) + "; AE mean pcs " + fixed(ae_pcs) +
                    " vro " + fixed(ae_vro) + "; BEs HL " + fixed(hl) + ", AEs LH " + fixed(lh)};
}

Outcome fitness_table() {
  const PatternThresholds t;
  struct Row {
    TargetType target;
    PopulationStats pop;
    FitnessInput x;
    int branch;
    double want;
  };
  auto in = [](double pcs, double vro, bool adv = false) { return FitnessInput{pcs, vro, 0.0, adv}; };
  const std::vector<Row> rows{
      {TargetType::LL, {0.5, 0.9, false}, in(0.8, 0.1), 1, -0.8},
      {TargetType::LL, {0.1, 0.9, false}, in(0.2, 0.5), 2, 0.5},
      {TargetType::LL, {0.1, 0.9, false}, in(0.4, 0.5), 2, -0.5},
      {TargetType::HH, {0.1, 0.65, false}, in(0.6, 0.9), 1, 0.6},
      {TargetType::HH, {0.1, 0.95, false}, in(0.9, 0.3), 2, 1.3},
      {TargetType::HH, {0.1, 0.95, false}, in(0.5, 0.9), 2, 0.9},
      {TargetType::HL_AE, {0.1, 0.95, false}, in(0.9, 0.1), 1, -0.9},
      {TargetType::HL_AE, {0.1, 0.65, true}, in(0.5, 0.1, true), 2, 1.5},
      {TargetType::HL_AE, {0.1, 0.65, true}, in(0.6, 0.1), 2, 0.6},
      {TargetType::HL_AE, {0.1, 0.95, true}, in(0.8, 0.2, true), 3, 1.8},
      {TargetType::HL_AE, {0.1, 0.95, true}, in(0.5, 0.2), 3, -0.2},
      {TargetType::LH_BE, {0.5, 0.95, false}, in(0.9, 0.1), 1, 0.1},
      {TargetType::LH_BE, {0.5, 0.95, false}, in(0.9, 0.1, true), 1, -0.9},
      {TargetType::LH_BE, {0.1, 0.95, false}, in(0.2, 0.7), 2, 2.7},
      {TargetType::LH_BE, {0.1, 0.95, false}, in(0.2, 0.7, true), 2, 1.7},
      {TargetType::LH_BE, {0.1, 0.95, false}, in(0.5, 0.7), 2, 1.7},
  };
  GaConfig cfg;
  std::size_t bad = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    cfg.target = r.target;
    const double err = std::abs(fitness(r.target, r.x, r.pop, cfg) - r.want);
    worst = std::max(worst, err);
    bad += err > kFitnessTol || fitness_branch(r.target, r.pop, t) != r.branch;
  }
  return {bad == 0, std::to_string(rows.size()) + " rows over all 10 branches, " + std::to_string(bad) +
                        " mismatches, worst error " + fmt("%.2g", worst) + " (tol 1e-12)"};
}

GaConfig ga_config(TargetType target, std::uint64_t seed) {
  GaConfig cfg;
  cfg.target = target;
  cfg.passes = kPasses;
  cfg.seed = seed;
  return cfg;
}

const std::vector<TargetType> kTargets{TargetType::LL, TargetType::HH, TargetType::LH_BE, TargetType::HL_AE};

Outcome ga_invariants() {
  const auto& d = toy();
  const float radius = static_cast<float>(GaConfig{}.linf_radius);
  std::size_t infeasible = 0, mislabeled = 0, drops = 0, elite_lost = 0, irreproducible = 0, individuals = 0,
              cross_branch_drops = 0;
  for (auto target : kTargets) {
    for (std::size_t s = 0; s < kGaRunsPerTarget; ++s) {
      const auto& seed = d.benign[s];
      const auto cfg = ga_config(target, 2000 + s);
      Tensor prev_best;
      const auto observer = [&](std::size_t g, const std::vector<Individual>& pop) {
        for (const auto& ind : pop) {
          ++individuals;
          bool ok = max_abs_diff(ind.image, seed) <= radius + 1e-6f;
          for (float v : ind.image.values()) ok = ok && v >= 0.0f && v <= 1.0f;
          infeasible += !ok;
          mislabeled += ind.is_adversarial != (predict_label(d.net, ind.image) != d.benign_labels[s]);
        }
        if (g > 0) {
          bool found = false;
          for (const auto& ind : pop) found = found || ind.image == prev_best;
          elite_lost += !found;
        }
        const auto best = std::max_element(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
          return a.fitness < b.fitness;
        });
        prev_best = best->image;
      };
      const auto rep = evolve(seed, d.benign_labels[s], d.net, cfg, {}, 1, observer);
      for (std::size_t g = 1; g < rep.trace.size(); ++g) {
        if (rep.trace[g].best_fitness >= rep.trace[g - 1].best_fitness) continue;
        if (rep.trace[g].branch == rep.trace[g - 1].branch) {
          ++drops;
        } else {
          ++cross_branch_drops;
        }
      }
      const auto again = evolve(seed, d.benign_labels[s], d.net, cfg, {}, jobs());
      bool same = again.generations == rep.generations && again.results.size() == rep.results.size() &&
                  again.success == rep.success;
      for (std::size_t i = 0; same && i < rep.results.size(); ++i)
        same = again.results[i].image == rep.results[i].image && again.results[i].fitness == rep.results[i].fitness;
      for (std::size_t g = 0; same && g < rep.trace.size(); ++g)
        same = again.trace[g].best_fitness == rep.trace[g].best_fitness;
      irreproducible += !same;
    }
  }
  const bool pass = infeasible == 0 && mislabeled == 0 && drops == 0 && elite_lost == 0 && irreproducible == 0;
  return {pass, std::to_string(kTargets.size() * kGaRunsPerTarget) + " runs, " + std::to_string(individuals) +
                    " evaluated individuals: infeasible " + std::to_string(infeasible) + ", AE flag mismatches " +
                    std::to_string(mislabeled) + ", same-branch best-fitness drops " + std::to_string(drops) +
                    ", lost elites " + std::to_string(elite_lost) + ", irreproducible runs " +
                    std::to_string(irreproducible) + " (branch-switch drops, not asserted: " +
                    std::to_string(cross_branch_drops) + ")"};
}

struct GaBatch {
  std::size_t seeds_ok = 0;
  std::vector<Tensor> outputs;
};

GaBatch generate(TargetType target, std::size_t seeds) {
  const auto& d = toy();
  GaBatch b;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto rep = evolve(d.benign[s], d.benign_labels[s], d.net, ga_config(target, kGaSeedBase + s), {}, jobs());
    if (!rep.success) continue;
    ++b.seeds_ok;
    for (const auto& ind : rep.results) b.outputs.push_back(ind.image);
  }
  return b;
}

Outcome uncommon_generation() {
  const std::map<TargetType, std::size_t> need{
      {TargetType::LL, 15}, {TargetType::HH, 10}, {TargetType::LH_BE, 5}, {TargetType::HL_AE, 3}};
  bool pass = true;
  std::string detail = "seeds with a satisfying output of " + std::to_string(kGenerationSeeds) + ":";
  for (auto target : kTargets) {
    const auto b = generate(target, kGenerationSeeds);
    pass = pass && b.seeds_ok >= need.at(target);
    detail += " " + std::string(target_name(target)) + " " + std::to_string(b.seeds_ok) + "/" +
              std::to_string(need.at(target)) + " (" + std::to_string(b.outputs.size()) + " images)";
  }
  return {pass, detail};
}

Outcome defense_bypass() {
  const auto& d = toy();
  const auto hl = generate(TargetType::HL_AE, kDefenseHlSeeds).outputs;
  if (hl.empty()) return {false, "no HL_AE images generated"};
  constexpr std::uint64_t kCalibKeys = std::uint64_t{1} << 40;
  constexpr std::uint64_t kDetectorSeed = 0;

  auto balanced = [&](std::size_t n_adv) {
    return std::vector<Tensor>(d.benign.begin(), d.benign.begin() + std::min(n_adv, d.benign.size()));
  };
  auto run = [&](Detector det, bool calibrate) {
    if (calibrate) {
      det.threshold = calibrate_threshold(score_set(det.score, d.calib_benign, kCalibKeys, jobs()),
                                          score_set(det.score, d.calib_adversarial, kCalibKeys + kAdvKeyOffset, jobs()));
    }
    const auto common = evaluate_defense(det, balanced(d.adversarial.size()), d.adversarial, "fgsm", jobs());
    const auto uncommon = evaluate_defense(det, balanced(hl.size()), hl, "hl_ae", jobs());
    return std::make_pair(common, uncommon);
  };

  const auto mutation = run(make_mutation_detector(d.net, {}, kDetectorSeed, 0.0), true);
  const auto squeeze = run(make_squeeze_detector(d.net, 4, 0.0), true);

  std::vector<Tensor> feats;
  std::vector<std::size_t> labels;
  for (const auto& x : d.calib_benign) {
    feats.push_back(logits(d.net, x));
    labels.push_back(0);
  }
  for (const auto& x : d.calib_adversarial) {
    feats.push_back(logits(d.net, x));
    labels.push_back(1);
  }
  TrainOptions topt;
  topt.epochs = 50;
  topt.lr = 0.1f;
  topt.batch_size = 8;
  RngStream rng(kDetectorSeed, 2);
  const auto clf = LogitClassifier::train(feats, labels, topt, rng);
  const double logit_acc = clf.heldout_accuracy();
  const auto logit = run(make_logit_detector(d.net, clf, 0.5), false);

  auto gap = [](const auto& p) { return p.first.success_combined - p.second.success_combined; };
  auto line = [&](const char* name, const auto& p) {
    return std::string(name) + " " + fixed(p.first.success_combined) + " vs " + fixed(p.second.success_combined) +
           " (gap " + fixed(gap(p)) + ", thr " + fmt("%.3g", p.first.threshold) + ")";
  };
  const bool pass = gap(mutation) >= kMutationGapMin && gap(squeeze) > 0.0 && gap(logit) > 0.0;
  return {pass, "HL_AE images " + std::to_string(hl.size()) + ", FGSM AEs " + std::to_string(d.adversarial.size()) +
                    "; combined success common vs uncommon: " + line("mutation", mutation) + "; " +
                    line("squeeze", squeeze) + "; " + line("logit", logit) + " heldout acc " + fixed(logit_acc) +
                    " (need mutation gap >= 0.20, others > 0)"};
}

// ---------------------------------------------------------------------------
// Determinism: each CLI command, then its manifest replayed at another width.

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

int tool(const std::string& args) {
  const std::string cmd = std::string("\"") + UQF_TOOL_PATH + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "uqf-acceptance-determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path data(UQF_DATA_DIR);
  const auto model = fs::path(UQF_ASSET_DIR) / "toy" / "digits-conv.pnf";
  const auto train = (data / "digits-train-images.idx").string() + "," + (data / "digits-train-labels.idx").string();
  const auto test = (data / "digits-test-images.idx").string() + "," + (data / "digits-test-labels.idx").string();
  auto pair = [](const fs::path& dir, const std::string& stem) {
    return "\"" + (dir / (stem + "-images.idx")).string() + "," + (dir / (stem + "-labels.idx")).string() + "\"";
  };

  struct Case {
    std::string name;
    std::string args;                // first run, --jobs 1 where the command has it
    fs::path out;                    // --out of the first run
    fs::path replay_out;             // --out of the replays
    std::vector<std::string> files;  // compared files; empty: `out` itself is the file
    bool parallel;
  };
  const auto att = root / "attack";
  const auto gen_cfg = root / "ga.json";
  std::ofstream(gen_cfg) << R"({"population_size": 30, "max_iterations": 10, "T": 20})";
  std::vector<Case> cases{
      {"train-toy", "train-toy --train \"" + train + "\" --test \"" + test + "\" --epochs 3 --out " +
                        q(root / "toy.pnf"),
       root / "toy.pnf", root / "toy-r.pnf", {}, false},
      {"attack", "attack --model " + q(model) + " --data \"" + test + "\" --limit 60 --search-steps 20 --jobs 1 --out " +
                     q(att),
       att, root / "attack-r", {"attack.csv", "adversarial-images.idx", "benign-images.idx"}, true},
      {"metrics", "metrics --model " + q(model) + " --data " + pair(att, "adversarial") +
                      " --passes 30 --seed 3 --jobs 1 --out " + q(root / "m.csv"),
       root / "m.csv", root / "m-r.csv", {}, true},
      {"metrics-benign", "metrics --model " + q(model) + " --data " + pair(att, "benign") +
                             " --passes 30 --seed 4 --group benign --jobs 1 --out " + q(root / "mb.csv"),
       root / "mb.csv", root / "mb-r.csv", {}, true},
      {"auc", "auc --benign " + q(root / "mb.csv") + " --adv " + q(root / "m.csv") + " --out " + q(root / "auc.csv"),
       root / "auc.csv", root / "auc-r.csv", {}, false},
      {"categorize", "categorize --report " + q(root / "m.csv") + " --out " + q(root / "cat.csv"), root / "cat.csv",
       root / "cat-r.csv", {}, false},
      {"generate", "generate --model " + q(model) + " --seeds " + pair(att, "benign") + " --type HH --config " +
                       q(gen_cfg) + " --limit 4 --jobs 1 --out " + q(root / "gen"),
       root / "gen", root / "gen-r", {"seeds.csv", "generated.csv", "seed-0000.json"}, true},
      {"defend", "defend --model " + q(model) + " --detector mutation --mutations 30 --benign " + pair(att, "benign") +
                     " --adv " + pair(att, "adversarial") + " --calib-benign " + pair(att, "benign") +
                     " --calib-adv " + pair(att, "adversarial") + " --jobs 1 --out " + q(root / "def.csv"),
       root / "def.csv", root / "def-r.csv", {}, true},
      {"export-fixtures", "export-fixtures --out " + q(root / "fx"), root / "fx", root / "fx-r",
       {"conv.pnf", "linear2.pnf", "mlp.pnf"}, false},
  };

  std::string detail;
  bool pass = true;
  for (const auto& c : cases) {
    if (tool(c.args) != 0) {
      pass = false;
      detail += " " + c.name + ":run-failed";
      continue;
    }
    const auto manifest = fs::is_directory(c.out) ? c.out / "manifest.json" : fs::path(c.out.string() + ".manifest.json");
    bool same = true;
    for (const char* width : {"1", "8"}) {
      if (!c.parallel && std::string(width) == "8") break;
      fs::remove_all(c.replay_out);
      const std::string extra = c.parallel ? std::string(" --jobs ") + width : "";
      if (tool("replay --manifest " + q(manifest) + " --out " + q(c.replay_out) + extra) != 0) {
        same = false;
        break;
      }
      if (c.files.empty()) {
        same = same && slurp(c.out) == slurp(c.replay_out) && !slurp(c.out).empty();
      } else {
        for (const auto& f : c.files) same = same && fs::exists(c.out / f) && slurp(c.out / f) == slurp(c.replay_out / f);
      }
    }
    pass = pass && same;
    detail += " " + c.name + (same ? ":identical" : ":DIFFERS");
  }
  return {pass, "replayed from manifest at jobs 1 and 8 (parallel commands):" + detail};
}

struct Criterion {
  std::string key;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"metric-identity", 10, metric_identity}, {"gradients", 30, gradients},
      {"auc-oracle", 30, auc_oracle},           {"detection-auc", 300, detection_auc},
      {"pattern-characterization", 300, pattern_characterization},       {"fitness-table", 10, fitness_table},
      {"ga-invariants", 600, ga_invariants},    {"uncommon-generation", 1800, uncommon_generation},
      {"defense-bypass", 600, defense_bypass},                {"determinism", 600, determinism},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.key) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.budget_seconds;
    failures += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.key << ": " << o.detail << " [" << fixed(secs, 1) << " s, budget "
              << c.budget_seconds << " s]" << std::endl;
  }
  for (const auto& w : wanted) {
    if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.key == w; })) {
      std::cout << "FAIL " << w << ": unknown criterion" << std::endl;
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}
