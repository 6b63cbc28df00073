#include "uqf/ga.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "uqf/error.hpp"
#include "uqf/parallel.hpp"

namespace uqf {

namespace {

constexpr std::uint64_t kOperatorStream = 0;
constexpr std::uint64_t kEvaluationTag = 1;

double indicator(bool b) { return b ? 1.0 : 0.0; }

}  // namespace

std::string_view target_name(TargetType t) {
  switch (t) {
    case TargetType::LL:
      return "LL";
    case TargetType::HH:
      return "HH";
    case TargetType::LH_BE:
      return "LH_BE";
    case TargetType::HL_AE:
      return "HL_AE";
  }
  return "LL";
}

std::optional<TargetType> parse_target(std::string_view name) {
  for (auto t : {TargetType::LL, TargetType::HH, TargetType::LH_BE, TargetType::HL_AE}) {
    if (target_name(t) == name) return t;
  }
  return std::nullopt;
}

void GaConfig::validate() const {
  if (population_size < 2) throw ConfigError("population_size must be at least 2");
  if (!(crossover_rate > 0.0 && crossover_rate <= 1.0)) throw ConfigError("crossover_rate must be in (0,1]");
  if (!(mutation_rate > 0.0 && mutation_rate <= 1.0)) throw ConfigError("mutation_rate must be in (0,1]");
  if (!(linf_radius > 0.0 && linf_radius <= 1.0)) throw ConfigError("linf_radius must be in (0,1]");
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (tournament_size < 1) throw ConfigError("tournament_size must be at least 1");
  if (elite_count >= population_size) throw ConfigError("elite_count must be smaller than population_size");
  if (passes < 1) throw ConfigError("T must be at least 1");
  thresholds.validate();
}

GaConfig ga_config_from_json(std::string_view text, GaConfig cfg) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("GA config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("GA config must be a flat JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object() || value.is_array()) throw ConfigError("GA config key '" + key + "' must be a scalar");
      if (key == "population_size") cfg.population_size = value.get<std::size_t>();
      else if (key == "crossover_rate") cfg.crossover_rate = value.get<double>();
      else if (key == "mutation_rate") cfg.mutation_rate = value.get<double>();
      else if (key == "linf_radius") cfg.linf_radius = value.get<double>();
      else if (key == "max_iterations") cfg.max_iterations = value.get<std::size_t>();
      else if (key == "tournament_size") cfg.tournament_size = value.get<std::size_t>();
      else if (key == "elite_count") cfg.elite_count = value.get<std::size_t>();
      else if (key == "T") cfg.passes = value.get<std::size_t>();
      else if (key == "p_low") cfg.thresholds.p_low = value.get<double>();
      else if (key == "p_high") cfg.thresholds.p_high = value.get<double>();
      else if (key == "v_low") cfg.thresholds.v_low = value.get<double>();
      else if (key == "v_high") cfg.thresholds.v_high = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "target_type") {
        auto t = parse_target(value.get<std::string>());
        if (!t) throw ConfigError("unknown target_type '" + value.get<std::string>() + "'");
        cfg.target = *t;
      } else if (key == "lh_dispersion") {
        const auto d = value.get<std::string>();
        if (d == "vro") cfg.lh_dispersion = Dispersion::vro;
        else if (d == "vr") cfg.lh_dispersion = Dispersion::vr;
        else throw ConfigError("lh_dispersion must be \"vro\" or \"vr\"");
      } else {
        throw ConfigError("unknown GA config key '" + key + "'");
      }
    }
  } catch (const json::type_error& e) {
    throw ConfigError(std::string("GA config value has the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string ga_config_to_json(const GaConfig& cfg) {
  nlohmann::ordered_json j;
  j["population_size"] = cfg.population_size;
  j["crossover_rate"] = cfg.crossover_rate;
  j["mutation_rate"] = cfg.mutation_rate;
  j["linf_radius"] = cfg.linf_radius;
  j["max_iterations"] = cfg.max_iterations;
  j["tournament_size"] = cfg.tournament_size;
  j["elite_count"] = cfg.elite_count;
  j["T"] = cfg.passes;
  j["p_low"] = cfg.thresholds.p_low;
  j["p_high"] = cfg.thresholds.p_high;
  j["v_low"] = cfg.thresholds.v_low;
  j["v_high"] = cfg.thresholds.v_high;
  j["target_type"] = std::string(target_name(cfg.target));
  j["seed"] = cfg.seed;
  j["lh_dispersion"] = cfg.lh_dispersion == Dispersion::vro ? "vro" : "vr";
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Fitness

double fitness_ll(const FitnessInput& x, const PopulationStats& pop, const PatternThresholds& t) {
  if (pop.min_pcs > t.p_low) return -x.pcs;
  return indicator(x.pcs < t.p_low) - x.vro;
}

double fitness_hh(const FitnessInput& x, const PopulationStats& pop, const PatternThresholds& t) {
  if (pop.max_pcs < t.p_high) return x.pcs;
  return indicator(x.pcs > t.p_high) + x.vro;
}

double fitness_hl_ae(const FitnessInput& x, const PopulationStats& pop, const PatternThresholds& t) {
  if (!pop.any_adversarial) return -x.pcs;
  const double ae = indicator(x.is_adversarial);
  if (pop.max_pcs < t.p_high) return ae + x.pcs;
  return ae + indicator(x.pcs > t.p_high) - x.vro;
}

double fitness_lh_be(const FitnessInput& x, const PopulationStats& pop, const PatternThresholds& t,
                     Dispersion dispersion) {
  const double be = indicator(!x.is_adversarial);
  if (pop.min_pcs > t.p_low) return be - x.pcs;
  return be + indicator(x.pcs < t.p_low) + (dispersion == Dispersion::vro ? x.vro : x.vr);
}

double fitness(TargetType target, const FitnessInput& x, const PopulationStats& pop, const GaConfig& cfg) {
  switch (target) {
    case TargetType::LL:
      return fitness_ll(x, pop, cfg.thresholds);
    case TargetType::HH:
      return fitness_hh(x, pop, cfg.thresholds);
    case TargetType::HL_AE:
      return fitness_hl_ae(x, pop, cfg.thresholds);
    case TargetType::LH_BE:
      return fitness_lh_be(x, pop, cfg.thresholds, cfg.lh_dispersion);
  }
  return 0.0;
}

int fitness_branch(TargetType target, const PopulationStats& pop, const PatternThresholds& t) {
  switch (target) {
    case TargetType::LL:
      return pop.min_pcs > t.p_low ? 1 : 2;
    case TargetType::HH:
      return pop.max_pcs < t.p_high ? 1 : 2;
    case TargetType::HL_AE:
      if (!pop.any_adversarial) return 1;
      return pop.max_pcs < t.p_high ? 2 : 3;
    case TargetType::LH_BE:
      return pop.min_pcs > t.p_low ? 1 : 2;
  }
  return 1;
}

bool objective_met(const UncertaintyProfile& p, bool is_adversarial, TargetType target, const PatternThresholds& t) {
  switch (target) {
    case TargetType::LL:
      return p.pcs < t.p_low && p.vro < t.v_low;
    case TargetType::HH:
      return p.pcs > t.p_high && p.vro > t.v_high;
    case TargetType::HL_AE:
      return p.pcs > t.p_high && p.vro < t.v_low && is_adversarial;
    case TargetType::LH_BE:
      return p.pcs < t.p_low && p.vro > t.v_high && !is_adversarial;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Search

void project_to_ball(Tensor& image, const Tensor& seed, float radius) {
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float lo = std::max(0.0f, seed[i] - radius);
    const float hi = std::min(1.0f, seed[i] + radius);
    image[i] = std::clamp(image[i], lo, hi);
  }
}

Population init_population(const Tensor& seed, const GaConfig& cfg, RngStream& rng) {
  cfg.validate();
  const auto r = static_cast<float>(cfg.linf_radius);
  Population pop;
  pop.individuals.reserve(cfg.population_size);
  for (std::size_t k = 0; k < cfg.population_size; ++k) {
    Individual ind;
    ind.image = seed;
    for (auto& v : ind.image.values()) v += static_cast<float>(rng.uniform(-cfg.linf_radius, cfg.linf_radius));
    project_to_ball(ind.image, seed, r);
    pop.individuals.push_back(std::move(ind));
  }
  return pop;
}

PopulationStats population_stats(const std::vector<Individual>& individuals) {
  if (individuals.empty()) throw ConfigError("empty population");
  PopulationStats s{individuals.front().profile.pcs, individuals.front().profile.pcs, false};
  for (const auto& ind : individuals) {
    s.min_pcs = std::min(s.min_pcs, ind.profile.pcs);
    s.max_pcs = std::max(s.max_pcs, ind.profile.pcs);
    s.any_adversarial = s.any_adversarial || ind.is_adversarial;
  }
  return s;
}

GenerationReport evolve(const Tensor& seed, std::size_t seed_label, const Network& net, const GaConfig& cfg,
                        const McOptions& mc, std::size_t jobs, const GenerationObserver& observer) {
  cfg.validate();
  if (predict_label(net, seed) != seed_label) {
    throw ConfigError("seed is not a benign example: model predicts " + std::to_string(predict_label(net, seed)) +
                      ", ground truth is " + std::to_string(seed_label));
  }
  const auto radius = static_cast<float>(cfg.linf_radius);
  const double sigma = cfg.linf_radius / 3.0;
  RngStream ops(cfg.seed, kOperatorStream);

  Population pop = init_population(seed, cfg, ops);
  std::vector<bool> evaluated(pop.individuals.size(), false);
  GenerationReport report;
  report.target = cfg.target;
  report.seed_label = seed_label;

  for (std::size_t g = 0; g < cfg.max_iterations; ++g) {
    auto& inds = pop.individuals;
    parallel_for(inds.size(), jobs, [&](std::size_t i) {
      if (evaluated[i]) return;
      RngStream rng(cfg.seed, derive_stream_id(kEvaluationTag, g, i));
      inds[i].profile = profile(net, inds[i].image, cfg.passes, rng, mc);
      inds[i].is_adversarial = inds[i].profile.original_label != seed_label;
      inds[i].generation = g;
    });
    std::fill(evaluated.begin(), evaluated.end(), true);

    pop.stats = population_stats(inds);
    GenerationTrace tr;
    tr.generation = g;
    tr.branch = fitness_branch(cfg.target, pop.stats, cfg.thresholds);
    tr.min_pcs = pop.stats.min_pcs;
    tr.max_pcs = pop.stats.max_pcs;
    tr.best_fitness = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::vector<std::size_t> satisfied;
    for (std::size_t i = 0; i < inds.size(); ++i) {
      const FitnessInput fx{inds[i].profile.pcs, inds[i].profile.vro, inds[i].profile.vr, inds[i].is_adversarial};
      inds[i].fitness = fitness(cfg.target, fx, pop.stats, cfg);
      tr.best_fitness = std::max(tr.best_fitness, inds[i].fitness);
      sum += inds[i].fitness;
      tr.adversarial += inds[i].is_adversarial;
      if (objective_met(inds[i].profile, inds[i].is_adversarial, cfg.target, cfg.thresholds)) satisfied.push_back(i);
    }
    tr.mean_fitness = sum / static_cast<double>(inds.size());
    tr.satisfied = satisfied.size();
    report.trace.push_back(tr);
    report.generations = g + 1;
    if (observer) observer(g, inds);

    if (!satisfied.empty()) {
      report.success = true;
      for (auto i : satisfied) report.results.push_back(inds[i]);
      return report;
    }
    if (g + 1 == cfg.max_iterations) break;

    // Next generation: elites first, then tournament offspring.
    std::vector<std::size_t> order(inds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return inds[a].fitness > inds[b].fitness; });
    std::vector<Individual> next;
    next.reserve(cfg.population_size);
    for (std::size_t e = 0; e < cfg.elite_count; ++e) next.push_back(inds[order[e]]);
    const std::size_t elites = next.size();

    auto tournament = [&] {
      std::size_t best = ops.uniform_index(inds.size());
      for (std::size_t k = 1; k < cfg.tournament_size; ++k) {
        const std::size_t c = ops.uniform_index(inds.size());
        if (inds[c].fitness > inds[best].fitness) best = c;
      }
      return best;
    };
    auto mutate = [&](Tensor& img) {
      for (auto& v : img.values()) {
        if (ops.uniform() < cfg.mutation_rate) v += static_cast<float>(sigma * ops.normal());
      }
      project_to_ball(img, seed, radius);
    };
    while (next.size() < cfg.population_size) {
      Tensor a = inds[tournament()].image;
      Tensor b = inds[tournament()].image;
      if (ops.uniform() < cfg.crossover_rate) {
        for (std::size_t p = 0; p < a.size(); ++p) {
          if (ops.uniform() < 0.5) std::swap(a[p], b[p]);
        }
      }
      mutate(a);
      mutate(b);
      next.push_back(Individual{std::move(a), 0.0, {}, false, g + 1});
      if (next.size() < cfg.population_size) next.push_back(Individual{std::move(b), 0.0, {}, false, g + 1});
    }
    inds = std::move(next);
    evaluated.assign(inds.size(), false);
    std::fill(evaluated.begin(), evaluated.begin() + static_cast<std::ptrdiff_t>(elites), true);
  }

  const auto& inds = pop.individuals;
  const auto best = std::max_element(inds.begin(), inds.end(),
                                     [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
  report.results.push_back(*best);
  return report;
}

}  // namespace uqf
