#include "uqf/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "uqf/error.hpp"
#include "uqf/parallel.hpp"

namespace uqf {

namespace {

// Pass distributions renormalized in double precision.
std::vector<std::vector<double>> normalized(const McRecord& rec) {
  std::vector<std::vector<double>> out;
  out.reserve(rec.passes());
  for (const auto& d : rec.distributions) {
    std::vector<double> p(d.values().begin(), d.values().end());
    double s = 0.0;
    for (double v : p) s += v;
    if (!(s > 0.0)) throw NumericError("MC distribution has zero mass");
    for (double& v : p) v /= s;
    out.push_back(std::move(p));
  }
  return out;
}

double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

void check_record(const McRecord& rec) {
  if (rec.passes() == 0) throw ConfigError("MC record needs at least one pass");
  if (rec.labels.size() != rec.passes()) throw ShapeError("MC record labels and distributions differ in length");
}

}  // namespace

void PatternThresholds::validate() const {
  if (!(p_low < p_high)) throw ConfigError("pattern thresholds need p_low < p_high");
  if (!(v_low < v_high)) throw ConfigError("pattern thresholds need v_low < v_high");
}

std::string_view pattern_name(PatternLabel p) {
  switch (p) {
    case PatternLabel::HL:
      return "HL";
    case PatternLabel::LH:
      return "LH";
    case PatternLabel::LL:
      return "LL";
    case PatternLabel::HH:
      return "HH";
    case PatternLabel::MID:
      return "MID";
  }
  return "MID";
}

std::optional<PatternLabel> parse_pattern(std::string_view name) {
  for (auto p : {PatternLabel::HL, PatternLabel::LH, PatternLabel::LL, PatternLabel::HH, PatternLabel::MID}) {
    if (pattern_name(p) == name) return p;
  }
  return std::nullopt;
}

McRecord McRecord::from_distributions(std::vector<Tensor> passes, Tensor original) {
  McRecord rec;
  for (const auto& d : passes) rec.labels.push_back(argmax(d.values()));
  rec.distributions = std::move(passes);
  rec.original_label = argmax(original.values());
  rec.original_distribution = std::move(original);
  return rec;
}

double pcs(std::span<const float> p) {
  if (p.size() < 2) throw ConfigError("PCS needs at least two classes");
  double first = -1.0, second = -1.0;
  for (float f : p) {
    const double v = f;
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

McRecord mc_execute(const Network& net, const Tensor& x, std::size_t passes, RngStream& rng,
                    const McOptions& options) {
  if (passes == 0) throw ConfigError("MC pass count T must be at least 1");
  McSampler sampler(net, x, options);
  std::vector<Tensor> dists;
  dists.reserve(passes);
  for (std::size_t k = 0; k < passes; ++k) dists.push_back(sampler.sample(rng));
  return McRecord::from_distributions(std::move(dists), forward(net, x));
}

std::size_t dominant_label(const McRecord& rec) {
  check_record(rec);
  const std::size_t classes = rec.distributions.front().size();
  std::vector<std::size_t> counts(std::max(classes, *std::max_element(rec.labels.begin(), rec.labels.end()) + 1), 0);
  for (auto l : rec.labels) ++counts[l];
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

double vr(const McRecord& rec) {
  const std::size_t l_max = dominant_label(rec);
  const auto n = std::count(rec.labels.begin(), rec.labels.end(), l_max);
  return 1.0 - static_cast<double>(n) / static_cast<double>(rec.passes());
}

double vro(const McRecord& rec) {
  check_record(rec);
  const auto n = std::count(rec.labels.begin(), rec.labels.end(), rec.original_label);
  return 1.0 - static_cast<double>(n) / static_cast<double>(rec.passes());
}

double pe(const McRecord& rec) {
  check_record(rec);
  const auto p = normalized(rec);
  const double T = static_cast<double>(p.size());
  double h = 0.0;
  for (std::size_t i = 0; i < p.front().size(); ++i) {
    double mean = 0.0;
    for (const auto& pass : p) mean += pass[i];
    h -= plogp(mean / T);
  }
  return h;
}

double mi(const McRecord& rec) {
  const double h_mean = pe(rec);
  const auto p = normalized(rec);
  double expected = 0.0;
  for (const auto& pass : p) {
    for (double v : pass) expected += plogp(v);
  }
  const double value = h_mean + expected / static_cast<double>(p.size());
  return value < 0.0 ? 0.0 : value;
}

UncertaintyProfile profile_from_record(const McRecord& rec) {
  UncertaintyProfile out;
  out.pcs = pcs(rec.original_distribution.values());
  out.vr = vr(rec);
  out.vro = vro(rec);
  out.pe = pe(rec);
  out.mi = mi(rec);
  out.dominant_label = dominant_label(rec);
  out.original_label = rec.original_label;
  out.passes = rec.passes();
  return out;
}

UncertaintyProfile profile(const Network& net, const Tensor& x, std::size_t passes, RngStream& rng,
                           const McOptions& options) {
  return profile_from_record(mc_execute(net, x, passes, rng, options));
}

std::vector<UncertaintyProfile> profile_batch(const Network& net, const std::vector<Tensor>& inputs,
                                              std::size_t passes, std::uint64_t base_seed, std::size_t jobs,
                                              const McOptions& options) {
  std::vector<UncertaintyProfile> out(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    RngStream rng(base_seed, i);
    out[i] = profile(net, inputs[i], passes, rng, options);
  });
  return out;
}

PatternLabel categorize(double p, double v, const PatternThresholds& t) {
  if (p > t.p_high && v < t.v_low) return PatternLabel::HL;
  if (p < t.p_low && v > t.v_high) return PatternLabel::LH;
  if (p < t.p_low && v < t.v_low) return PatternLabel::LL;
  if (p > t.p_high && v > t.v_high) return PatternLabel::HH;
  return PatternLabel::MID;
}

PatternLabel categorize(const UncertaintyProfile& p, const PatternThresholds& t) { return categorize(p.pcs, p.vro, t); }

}  // namespace uqf
