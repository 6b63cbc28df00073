#include "uqf/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "commands.hpp"
#include "manifest.hpp"
#include "uqf/dataset_io.hpp"
#include "uqf/error.hpp"
#include "uqf/evaluation.hpp"
#include "uqf/fixtures.hpp"
#include "uqf/kernels.hpp"
#include "uqf/model_io.hpp"
#include "uqf/train.hpp"

namespace uqf::cli {

PatternThresholds parse_thresholds(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("thresholds must be four numbers p_low,p_high,v_low,v_high; got '" + text + "'");
    }
  }
  if (v.size() != 4) throw ConfigError("thresholds must be four numbers p_low,p_high,v_low,v_high; got '" + text + "'");
  PatternThresholds t{v[0], v[1], v[2], v[3]};
  t.validate();
  return t;
}

std::string thresholds_string(const PatternThresholds& t) {
  ojson j = {t.p_low, t.p_high, t.v_low, t.v_high};
  std::string s;
  for (const auto& x : j) s += (s.empty() ? "" : ",") + x.dump();
  return s;
}

std::vector<Tensor> samples_of(const LabeledDataset& data) {
  std::vector<Tensor> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(data.sample(i));
  return out;
}

LabeledDataset stack(const std::vector<Tensor>& samples, std::vector<std::size_t> labels, const std::string& provenance) {
  return LabeledDataset::from_samples(samples, std::move(labels), provenance);
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("--") + name + " must be a positive number");
}

}  // namespace

Command add_train_toy(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string train, test, arch = "conv", out;
    double dropout = 0.8, lr = 0.05;
    std::size_t epochs = 15, batch = 8;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("train-toy", "Train the small digits classifier and save it as PNF");
  sub->add_option("--train", o->train, "Training set: images.idx,labels.idx or data.csv")->required();
  sub->add_option("--test", o->test, "Optional held-out set for reporting accuracy");
  sub->add_option("--arch", o->arch, "conv or mlp")->capture_default_str();
  sub->add_option("--dropout", o->dropout, "Dropout rate before the last dense layer")->capture_default_str();
  sub->add_option("--epochs", o->epochs)->capture_default_str();
  sub->add_option("--lr", o->lr, "SGD learning rate")->capture_default_str();
  sub->add_option("--batch", o->batch, "Minibatch size")->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--out", o->out, "Output model file")->required();
  return {sub, [o, &ctx] {
            if (o->arch != "conv" && o->arch != "mlp") throw ConfigError("--arch must be conv or mlp");
            if (!(o->dropout > 0.0 && o->dropout < 1.0)) throw ConfigError("--dropout must be in (0, 1)");
            require_positive(o->lr, "lr");
            if (o->epochs == 0 || o->batch == 0) throw ConfigError("--epochs and --batch must be positive");
            RunManifest m("train-toy");
            m.set_path("train", o->train);
            if (!o->test.empty()) m.set_path("test", o->test);
            m.set("arch", o->arch);
            m.set("dropout", o->dropout);
            m.set("epochs", o->epochs);
            m.set("lr", o->lr);
            m.set("batch", o->batch);
            m.set("seed", o->seed);
            m.set_path("out", o->out);
            m.seed("init_and_shuffle", o->seed, "RngStream(seed, 0): weight init, then per-epoch shuffles and dropout masks");

            const auto train = load_dataset_spec(o->train);
            m.input(o->train);
            std::optional<LabeledDataset> test;
            if (!o->test.empty()) {
              test = load_dataset_spec(o->test);
              m.input(o->test);
            }
            RngStream rng(o->seed, 0);
            auto net = make_toy_model(o->arch == "conv" ? ToyArch::conv : ToyArch::mlp,
                                      static_cast<float>(o->dropout), rng);
            if (train.sample_shape() != net.input_shape()) {
              throw ConfigError("training samples have shape " + shape_to_string(train.sample_shape()) +
                                ", the toy model expects " + shape_to_string(net.input_shape()));
            }
            TrainOptions topt;
            topt.epochs = o->epochs;
            topt.lr = static_cast<float>(o->lr);
            topt.batch_size = o->batch;
            auto res = sgd_train(net, train, topt, rng);

            std::string log = "epoch,mean_loss\n";
            for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
              log += std::to_string(e + 1) + ',' + format_real(res.epoch_loss[e]) + '\n';
            }
            const std::filesystem::path out(o->out);
            const std::filesystem::path log_path(o->out + ".train.csv");
            save_model(res.net, out);
            write_file_atomic(log_path, log);
            m.output(out);
            m.output(log_path);
            m.write(manifest_for_file(out));
            ctx.out << "train accuracy " << res.train_accuracy;
            if (test) ctx.out << ", test accuracy " << accuracy(res.net, *test);
            ctx.out << "\nwrote " << out.string() << "\n";
            return kExitOk;
          }};
}

Command add_export_fixtures(CLI::App& app, Context& ctx) {
  auto out = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("export-fixtures", "Write the built-in fixture models as PNF files");
  sub->add_option("--out", *out, "Output directory")->required();
  return {sub, [out, &ctx] {
            RunManifest m("export-fixtures");
            m.set_path("out", *out);
            const std::filesystem::path dir(*out);
            std::filesystem::create_directories(dir);
            for (const auto& [name, net] : fixture_models()) {
              const auto p = dir / (name + ".pnf");
              save_model(net, p);
              m.output(p);
              ctx.out << "wrote " << p.string() << "\n";
            }
            m.write(manifest_for_dir(dir));
            return kExitOk;
          }};
}

Command add_probe(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string model, probe;
    double tolerance = 1e-4;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("probe", "Check a model against the probe batch written by the exporter");
  sub->add_option("--model", o->model)->required();
  sub->add_option("--probe", o->probe, "Probe JSON: {input_shape, inputs, outputs}")->required();
  sub->add_option("--tolerance", o->tolerance, "Largest allowed absolute difference")->capture_default_str();
  return {sub, [o, &ctx] {
            require_positive(o->tolerance, "tolerance");
            const auto net = load_model(o->model);
            const auto bytes = read_file_bytes(o->probe);
            ojson j;
            try {
              j = ojson::parse(bytes.begin(), bytes.end());
            } catch (const nlohmann::json::parse_error& e) {
              throw FormatError(std::string("probe file is not JSON: ") + e.what(), e.byte);
            }
            if (!j.contains("inputs") || !j.contains("outputs") || !j["inputs"].is_array() || !j["outputs"].is_array() ||
                j["inputs"].size() != j["outputs"].size() || j["inputs"].empty()) {
              throw FormatError("probe file needs equally long non-empty 'inputs' and 'outputs' arrays", 0);
            }
            double worst = 0.0;
            for (std::size_t i = 0; i < j["inputs"].size(); ++i) {
              const auto in = j["inputs"][i].get<std::vector<float>>();
              const auto expected = j["outputs"][i].get<std::vector<double>>();
              const Tensor y = forward(net, Tensor(net.input_shape(), in));
              if (expected.size() != y.size()) {
                throw ShapeError("probe " + std::to_string(i) + " has " + std::to_string(expected.size()) +
                                 " outputs, the model gives " + std::to_string(y.size()));
              }
              for (std::size_t k = 0; k < y.size(); ++k) worst = std::max(worst, std::abs(y[k] - expected[k]));
            }
            ctx.out << "probes " << j["inputs"].size() << ", max abs diff " << format_real(worst) << "\n";
            if (worst >= o->tolerance) {
              ctx.err << "error: probe outputs differ by " << worst << " (tolerance " << o->tolerance << ")\n";
              return kExitRuntime;
            }
            return kExitOk;
          }};
}

}  // namespace uqf::cli

namespace uqf {

namespace {

int classify(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitValidation;
  return kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace cli;
  CLI::App app("Uncertainty profiling, pattern categorization and uncommon-input generation for classifiers", "uqf");
  app.require_subcommand(1);
  std::string kernel_choice = "auto";
  app.add_option("--kernels", kernel_choice, "Kernel backend: auto, scalar, avx2 or neon")->capture_default_str();
  Context ctx{out, err};

  std::vector<Command> commands{add_train_toy(app, ctx), add_attack(app, ctx),      add_metrics(app, ctx),
                                add_auc(app, ctx),       add_categorize(app, ctx),  add_generate(app, ctx),
                                add_defend(app, ctx),    add_export_fixtures(app, ctx), add_probe(app, ctx)};
  for (auto& c : commands) c.app->fallthrough();

  struct ReplayOpts {
    std::string manifest, out;
    std::optional<std::size_t> jobs;
  } replay;
  auto* replay_sub = app.add_subcommand("replay", "Re-run a command from its manifest");
  replay_sub->add_option("--manifest", replay.manifest)->required();
  replay_sub->add_option("--out", replay.out, "Write to this path instead of the recorded one");
  replay_sub->add_option("--jobs", replay.jobs, "Override the recorded parallel width");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* shown = &app;
    for (const auto& c : commands)
      if (c.app->parsed()) shown = c.app;
    err << shown->help();
    return kExitValidation;
  }

  try {
    const auto backend = kernels::parse_backend(kernel_choice);
    if (!backend) throw ConfigError("unknown kernel backend '" + kernel_choice + "'");
    kernels::set_backend(*backend);

    if (replay_sub->parsed()) {
      const auto bytes = read_file_bytes(replay.manifest);
      ojson m;
      try {
        m = ojson::parse(bytes.begin(), bytes.end());
      } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("manifest is not JSON: ") + e.what(), e.byte);
      }
      ojson overrides = ojson::object();
      if (!replay.out.empty()) overrides["out"] = replay.out;
      if (replay.jobs) overrides["jobs"] = *replay.jobs;
      const auto replay_argv = replay_args(m, overrides);
      if (replay_argv.front() == "replay") throw ConfigError("a manifest cannot replay another replay");
      return run_cli(replay_argv, out, err);
    }
    for (auto& c : commands)
      if (c.app->parsed()) return c.run();
    err << app.help();
    return kExitValidation;
  } catch (const std::exception& e) {
    return classify(e, err);
  }
}

}  // namespace uqf
