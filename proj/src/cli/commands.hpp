#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uqf/cli.hpp"
#include "uqf/dataset.hpp"
#include "uqf/network.hpp"
#include "uqf/uncertainty.hpp"

namespace uqf::cli {

struct Context {
  std::ostream& out;
  std::ostream& err;
};

struct Command {
  CLI::App* app;
  std::function<int()> run;
};

Command add_train_toy(CLI::App& app, Context& ctx);
Command add_attack(CLI::App& app, Context& ctx);
Command add_metrics(CLI::App& app, Context& ctx);
Command add_auc(CLI::App& app, Context& ctx);
Command add_categorize(CLI::App& app, Context& ctx);
Command add_generate(CLI::App& app, Context& ctx);
Command add_defend(CLI::App& app, Context& ctx);
Command add_export_fixtures(CLI::App& app, Context& ctx);
Command add_probe(CLI::App& app, Context& ctx);

// Shared helpers.
PatternThresholds parse_thresholds(const std::string& text);
std::string thresholds_string(const PatternThresholds& t);
std::vector<Tensor> samples_of(const LabeledDataset& data);
/// Stacks samples into a dataset; `samples` must be non-empty.
LabeledDataset stack(const std::vector<Tensor>& samples, std::vector<std::size_t> labels, const std::string& provenance);

}  // namespace uqf::cli
