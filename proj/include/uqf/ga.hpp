#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uqf/network.hpp"
#include "uqf/rng.hpp"
#include "uqf/uncertainty.hpp"

namespace uqf {

/// Uncommon-input categories the generator searches for.
enum class TargetType { LL, HH, LH_BE, HL_AE };

std::string_view target_name(TargetType t);
std::optional<TargetType> parse_target(std::string_view name);

/// Spread term used by the LH_BE fitness once some PCS falls below p_low.
enum class Dispersion { vro, vr };

struct GaConfig {
  std::size_t population_size = 100;
  double crossover_rate = 0.5;
  double mutation_rate = 0.005;
  double linf_radius = 0.3;
  std::size_t max_iterations = 50;
  std::size_t tournament_size = 5;
  std::size_t elite_count = 1;
  std::size_t passes = 50;  // T
  PatternThresholds thresholds;
  TargetType target = TargetType::LL;
  std::uint64_t seed = 0;
  Dispersion lh_dispersion = Dispersion::vro;

  void validate() const;
};

/// Flat JSON object: population_size, crossover_rate, mutation_rate,
/// linf_radius, max_iterations, tournament_size, elite_count, T, p_low,
/// p_high, v_low, v_high, target_type, seed, lh_dispersion. Missing keys keep
/// their defaults; unknown keys are rejected.
GaConfig ga_config_from_json(std::string_view text, GaConfig base = {});
std::string ga_config_to_json(const GaConfig& cfg);

/// Population aggregates that select the fitness branch.
struct PopulationStats {
  double min_pcs = 0.0;
  double max_pcs = 0.0;
  bool any_adversarial = false;
};

/// Per-individual quantities the fitness functions read.
struct FitnessInput {
  double pcs = 0.0;
  double vro = 0.0;
  double vr = 0.0;
  bool is_adversarial = false;
};

double fitness_ll(const FitnessInput& x, const PopulationStats& pop, const PatternThresholds& t);
double fitness_hh(const FitnessInput& x, const PopulationStats& pop, const PatternThresholds& t);
double fitness_hl_ae(const FitnessInput& x, const PopulationStats& pop, const PatternThresholds& t);
double fitness_lh_be(const FitnessInput& x, const PopulationStats& pop, const PatternThresholds& t,
                     Dispersion dispersion = Dispersion::vro);
double fitness(TargetType target, const FitnessInput& x, const PopulationStats& pop, const GaConfig& cfg);

/// 1-based index of the piecewise branch in effect for a population.
int fitness_branch(TargetType target, const PopulationStats& pop, const PatternThresholds& t);

bool objective_met(const UncertaintyProfile& p, bool is_adversarial, TargetType target, const PatternThresholds& t);

struct Individual {
  Tensor image;
  double fitness = 0.0;
  UncertaintyProfile profile;
  bool is_adversarial = false;
  std::size_t generation = 0;
};

struct Population {
  std::vector<Individual> individuals;
  PopulationStats stats;
};

/// Seed plus independent uniform noise in [-r, r] per pixel, clipped to [0,1].
/// Individuals are not evaluated yet.
Population init_population(const Tensor& seed, const GaConfig& cfg, RngStream& rng);

PopulationStats population_stats(const std::vector<Individual>& individuals);

struct GenerationTrace {
  std::size_t generation = 0;
  int branch = 1;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double min_pcs = 0.0;
  double max_pcs = 0.0;
  std::size_t adversarial = 0;
  std::size_t satisfied = 0;
};

struct GenerationReport {
  TargetType target = TargetType::LL;
  std::size_t seed_label = 0;
  bool success = false;
  std::size_t generations = 0;  // generations evaluated
  /// Every objective-satisfying individual of the stopping generation, or the
  /// single fittest individual when none satisfied the objective.
  std::vector<Individual> results;
  std::vector<GenerationTrace> trace;
};

/// Genetic search around a benign seed. `seed_label` is the seed's ground
/// truth, which must equal the model's prediction on the seed.
/// Evaluation of individual (generation g, slot i) draws from
/// RngStream(cfg.seed, derive_stream_id(1, g, i)); genetic operators use
/// RngStream(cfg.seed, 0). Results do not depend on `jobs`.
/// `observer`, when set, sees every generation's evaluated population.
using GenerationObserver = std::function<void(std::size_t generation, const std::vector<Individual>& population)>;

GenerationReport evolve(const Tensor& seed, std::size_t seed_label, const Network& net, const GaConfig& cfg,
                        const McOptions& mc = {}, std::size_t jobs = 1, const GenerationObserver& observer = {});

/// Clip every pixel to [0,1] and to the L-infinity ball of `radius` around `seed`.
void project_to_ball(Tensor& image, const Tensor& seed, float radius);

}  // namespace uqf
