#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>

#include "commands.hpp"
#include "manifest.hpp"
#include "uqf/attacks.hpp"
#include "uqf/dataset_io.hpp"
#include "uqf/defense.hpp"
#include "uqf/error.hpp"
#include "uqf/evaluation.hpp"
#include "uqf/ga.hpp"
#include "uqf/model_io.hpp"
#include "uqf/parallel.hpp"

namespace uqf::cli {

namespace {

constexpr std::string_view kDefaultThresholds = "0.3,0.7,0.4,0.6";

void check_input_shape(const Network& net, const LabeledDataset& data, const std::string& what) {
  if (data.sample_shape() != net.input_shape()) {
    throw ConfigError(what + " samples have shape " + shape_to_string(data.sample_shape()) + ", the model expects " +
                      shape_to_string(net.input_shape()));
  }
  data.validate(net.class_count());
}

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

void write_idx_pair(const std::vector<Tensor>& images, const std::vector<std::size_t>& labels,
                    const std::filesystem::path& dir, const std::string& stem, RunManifest& m, Context& ctx) {
  if (images.empty()) {
    ctx.out << "no " << stem << " images, skipped " << stem << "-images.idx\n";
    return;
  }
  const auto img = dir / (stem + "-images.idx");
  const auto lab = dir / (stem + "-labels.idx");
  save_idx(stack(images, labels, stem), img, lab, IdxPixelType::float32);
  m.output(img);
  m.output(lab);
}

}  // namespace

Command add_attack(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string model, data, method = "fgsm", out;
    double eps = 0.3;
    std::size_t bim_steps = 10, search_steps = 0, limit = 0, jobs = 1;
    std::optional<double> bim_step_size;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("attack", "Craft FGSM or BIM adversarial examples from correctly classified inputs");
  sub->add_option("--model", o->model)->required();
  sub->add_option("--data", o->data, "images.idx,labels.idx or data.csv")->required();
  sub->add_option("--method", o->method, "fgsm or bim")->capture_default_str();
  sub->add_option("--eps", o->eps, "L-infinity budget")->capture_default_str();
  sub->add_option("--bim-steps", o->bim_steps)->capture_default_str();
  sub->add_option("--bim-step-size", o->bim_step_size, "Default eps / 10");
  sub->add_option("--search-steps", o->search_steps,
                  "FGSM: try eps*k/N for k = 1..N and keep the smallest flipping step (0 = single step)")
      ->capture_default_str();
  sub->add_option("--limit", o->limit, "Attack at most this many inputs (0 = all)")->capture_default_str();
  sub->add_option("--jobs", o->jobs)->capture_default_str();
  sub->add_option("--out", o->out, "Output directory")->required();
  return {sub, [o, &ctx] {
            const auto method = parse_attack(o->method);
            if (!method) throw ConfigError("--method must be fgsm or bim");
            auto cfg = AttackConfig::defaults(*method, static_cast<float>(o->eps));
            cfg.bim_steps = o->bim_steps;
            if (o->bim_step_size) cfg.bim_step_size = static_cast<float>(*o->bim_step_size);
            cfg.epsilon_search_steps = o->search_steps;
            cfg.validate();

            RunManifest m("attack");
            m.set_path("model", o->model);
            m.set_path("data", o->data);
            m.set("method", o->method);
            m.set("eps", o->eps);
            m.set("bim-steps", o->bim_steps);
            m.set("bim-step-size", static_cast<double>(cfg.bim_step_size));
            m.set("search-steps", o->search_steps);
            m.set("limit", o->limit);
            m.set("jobs", o->jobs);
            m.set_path("out", o->out);

            const auto net = load_model(o->model);
            const auto data = load_dataset_spec(o->data);
            check_input_shape(net, data, "--data");
            m.input(o->model);
            m.input(o->data);

            const std::size_t n = o->limit == 0 ? data.size() : std::min(o->limit, data.size());
            std::vector<std::size_t> predicted(n);
            std::vector<std::optional<AdversarialResult>> results(n);
            parallel_for(n, o->jobs, [&](std::size_t i) {
              const auto x = data.sample(i);
              predicted[i] = predict_label(net, x);
              if (predicted[i] == data.labels[i]) results[i] = run_attack(net, x, data.labels[i], cfg);
            });

            std::string csv = "index,label_true,label_pred,attacked,success,label_adv,linf,iterations\n";
            std::vector<Tensor> adv, benign;
            std::vector<std::size_t> adv_labels, benign_labels;
            for (std::size_t i = 0; i < n; ++i) {
              const auto& r = results[i];
              csv += std::to_string(i) + ',' + std::to_string(data.labels[i]) + ',' + std::to_string(predicted[i]) + ',' +
                     (r ? "1" : "0") + ',' + (r && r->success ? "1" : "0") + ',' +
                     (r ? std::to_string(r->adversarial_label) : "") + ',' + (r ? format_real(r->linf) : "") + ',' +
                     (r ? std::to_string(r->iterations) : "") + '\n';
              if (!r) continue;
              benign.push_back(data.sample(i));
              benign_labels.push_back(data.labels[i]);
              if (r->success) {
                adv.push_back(r->image);
                adv_labels.push_back(data.labels[i]);
              }
            }

            const std::filesystem::path dir(o->out);
            std::filesystem::create_directories(dir);
            write_file_atomic(dir / "attack.csv", csv);
            m.output(dir / "attack.csv");
            write_idx_pair(adv, adv_labels, dir, "adversarial", m, ctx);
            write_idx_pair(benign, benign_labels, dir, "benign", m, ctx);
            m.write(manifest_for_dir(dir));
            ctx.out << "attacked " << benign.size() << " of " << n << " inputs, " << adv.size() << " succeeded\n";
            return kExitOk;
          }};
}

Command add_metrics(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string model, data, group = "data", thresholds{kDefaultThresholds}, out;
    std::size_t passes = kPassesMnist, jobs = 1;
    std::uint64_t seed = 0;
    double auto_dropout = 0.5;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("metrics", "Uncertainty profile (pcs, vr, vro, pe, mi, pattern) of every input");
  sub->add_option("--model", o->model)->required();
  sub->add_option("--data", o->data, "images.idx,labels.idx or data.csv")->required();
  sub->add_option("--passes", o->passes, "Monte-Carlo dropout passes (T)")->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--jobs", o->jobs)->capture_default_str();
  sub->add_option("--group", o->group, "Value of the report's group column")->capture_default_str();
  sub->add_option("--thresholds", o->thresholds, "p_low,p_high,v_low,v_high")->capture_default_str();
  sub->add_option("--auto-dropout", o->auto_dropout, "Rate of the dropout site added to models without one")
      ->capture_default_str();
  sub->add_option("--out", o->out, "Report CSV")->required();
  return {sub, [o, &ctx] {
            const auto t = parse_thresholds(o->thresholds);
            if (o->passes == 0) throw ConfigError("--passes must be positive");
            if (!(o->auto_dropout > 0.0 && o->auto_dropout < 1.0)) throw ConfigError("--auto-dropout must be in (0, 1)");
            if (o->group.empty() || o->group.find_first_of(",\n\"") != std::string::npos) {
              throw ConfigError("--group must be non-empty and free of commas and quotes");
            }
            RunManifest m("metrics");
            m.set_path("model", o->model);
            m.set_path("data", o->data);
            m.set("passes", o->passes);
            m.set("seed", o->seed);
            m.set("jobs", o->jobs);
            m.set("group", o->group);
            m.set("thresholds", thresholds_string(t));
            m.set("auto-dropout", o->auto_dropout);
            m.set_path("out", o->out);
            m.seed("mc_dropout", o->seed, "input i uses RngStream(seed, i)");

            const auto net = load_model(o->model);
            const auto data = load_dataset_spec(o->data);
            check_input_shape(net, data, "--data");
            m.input(o->model);
            m.input(o->data);

            McOptions mc;
            mc.auto_dropout_rate = static_cast<float>(o->auto_dropout);
            const auto profiles = profile_batch(net, samples_of(data), o->passes, o->seed, o->jobs, mc);
            std::vector<ReportRow> rows;
            for (std::size_t i = 0; i < profiles.size(); ++i) {
              rows.push_back(make_report_row(o->group + "-" + std::to_string(i), o->group, data.labels[i], profiles[i], t));
            }
            emit_report(rows, o->out);
            m.output(o->out);
            m.write(manifest_for_file(o->out));
            ctx.out << "profiled " << rows.size() << " inputs with T = " << o->passes << "\n";
            return kExitOk;
          }};
}

Command add_auc(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string benign, adv, out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("auc", "AUC-ROC of every metric for separating adversarial from benign reports");
  sub->add_option("--benign", o->benign, "Report CSV of benign inputs")->required();
  sub->add_option("--adv", o->adv, "Report CSV of adversarial inputs")->required();
  sub->add_option("--out", o->out, "AUC CSV")->required();
  return {sub, [o, &ctx] {
            RunManifest m("auc");
            m.set_path("benign", o->benign);
            m.set_path("adv", o->adv);
            m.set_path("out", o->out);
            const auto b = read_report(o->benign);
            const auto a = read_report(o->adv);
            m.input(o->benign);
            m.input(o->adv);
            std::vector<UncertaintyProfile> pb, pa;
            for (const auto& r : b) pb.push_back(r.profile());
            for (const auto& r : a) pa.push_back(r.profile());
            const auto aucs = metric_aucs(pb, pa);
            write_file_atomic(o->out, auc_csv(aucs, pa.size(), pb.size()));
            m.output(o->out);
            m.write(manifest_for_file(o->out));
            for (const auto& x : aucs) ctx.out << metric_name(x.metric) << " " << format_real(x.auc) << "\n";
            return kExitOk;
          }};
}

Command add_categorize(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string report, thresholds{kDefaultThresholds}, out, summary;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("categorize", "Re-label a report's patterns under new thresholds");
  sub->add_option("--report", o->report, "Report CSV written by metrics")->required();
  sub->add_option("--thresholds", o->thresholds, "p_low,p_high,v_low,v_high")->capture_default_str();
  sub->add_option("--summary", o->summary, "Also write per-group mean / population variance CSV");
  sub->add_option("--out", o->out, "Report CSV with updated pattern column")->required();
  return {sub, [o, &ctx] {
            const auto t = parse_thresholds(o->thresholds);
            RunManifest m("categorize");
            m.set_path("report", o->report);
            m.set("thresholds", thresholds_string(t));
            if (!o->summary.empty()) m.set_path("summary", o->summary);
            m.set_path("out", o->out);
            auto rows = read_report(o->report);
            m.input(o->report);

            std::map<std::string, std::size_t> counts;
            std::vector<ProfileGroup> groups;
            for (auto& r : rows) {
              r.pattern = categorize(r.pcs, r.vro, t);
              ++counts[std::string(pattern_name(r.pattern))];
              auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.name == r.group; });
              if (it == groups.end()) it = groups.insert(groups.end(), ProfileGroup{r.group, {}});
              it->profiles.push_back(r.profile());
            }
            std::vector<SummaryRow> summary;
            if (!o->summary.empty()) summary = summarize(groups);
            emit_report(rows, o->out);
            m.output(o->out);
            if (!o->summary.empty()) {
              emit_summary(summary, o->summary);
              m.output(o->summary);
            }
            m.write(manifest_for_file(o->out));
            for (const auto& [name, c] : counts) ctx.out << name << " " << c << "\n";
            return kExitOk;
          }};
}

namespace {

ojson profile_json(const UncertaintyProfile& p) {
  return {{"pcs", p.pcs},   {"vr", p.vr},
          {"vro", p.vro},   {"pe", p.pe},
          {"mi", p.mi},     {"dominant_label", p.dominant_label},
          {"original_label", p.original_label}, {"passes", p.passes}};
}

}  // namespace

Command add_generate(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string model, seeds, type, config, out, thresholds;
    std::optional<std::uint64_t> seed;
    std::size_t limit = 0, jobs = 1;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("generate", "Genetic search for uncommon inputs around each benign seed");
  sub->add_option("--model", o->model)->required();
  sub->add_option("--seeds", o->seeds, "Seed inputs: images.idx,labels.idx or data.csv")->required();
  sub->add_option("--type", o->type, "LL, HH, LH_BE or HL_AE")->required();
  sub->add_option("--config", o->config, "GA configuration JSON");
  sub->add_option("--seed", o->seed, "Base seed; overrides the configuration's seed");
  sub->add_option("--thresholds", o->thresholds, "p_low,p_high,v_low,v_high; overrides the configuration");
  sub->add_option("--limit", o->limit, "Use at most this many seed inputs (0 = all)")->capture_default_str();
  sub->add_option("--jobs", o->jobs)->capture_default_str();
  sub->add_option("--out", o->out, "Output directory")->required();
  return {sub, [o, &ctx] {
            const auto target = parse_target(o->type);
            if (!target) throw ConfigError("--type must be LL, HH, LH_BE or HL_AE");
            GaConfig cfg;
            if (!o->config.empty()) {
              const auto bytes = read_file_bytes(o->config);
              cfg = ga_config_from_json(std::string(bytes.begin(), bytes.end()));
            }
            cfg.target = *target;
            if (o->seed) cfg.seed = *o->seed;
            if (!o->thresholds.empty()) cfg.thresholds = parse_thresholds(o->thresholds);
            cfg.validate();

            RunManifest m("generate");
            m.set_path("model", o->model);
            m.set_path("seeds", o->seeds);
            m.set("type", std::string(target_name(cfg.target)));
            if (!o->config.empty()) m.set_path("config", o->config);
            m.set("seed", cfg.seed);
            m.set("thresholds", thresholds_string(cfg.thresholds));
            m.set("limit", o->limit);
            m.set("jobs", o->jobs);
            m.set_path("out", o->out);
            m.seed("ga", cfg.seed, "seed input i runs with GA seed derive_stream_id(seed, i)");

            const auto net = load_model(o->model);
            const auto data = load_dataset_spec(o->seeds);
            check_input_shape(net, data, "--seeds");
            m.input(o->model);
            m.input(o->seeds);
            if (!o->config.empty()) m.input(o->config);

            const std::size_t n = o->limit == 0 ? data.size() : std::min(o->limit, data.size());
            std::string seeds_csv = "seed_index,label,status,success,generations,results\n";
            std::string report_rows_csv;
            std::vector<ReportRow> rows;
            std::vector<Tensor> images;
            std::vector<std::size_t> labels;
            std::vector<std::pair<std::string, std::string>> json_files;
            std::size_t successes = 0;
            for (std::size_t i = 0; i < n; ++i) {
              const auto x = data.sample(i);
              const std::size_t label = data.labels[i];
              if (predict_label(net, x) != label) {
                seeds_csv += std::to_string(i) + ',' + std::to_string(label) + ",not_benign,0,0,0\n";
                continue;
              }
              GaConfig run_cfg = cfg;
              run_cfg.seed = derive_stream_id(cfg.seed, i);
              const auto rep = evolve(x, label, net, run_cfg, {}, o->jobs);
              successes += rep.success ? 1 : 0;
              seeds_csv += std::to_string(i) + ',' + std::to_string(label) + ",searched," + (rep.success ? "1" : "0") +
                           ',' + std::to_string(rep.generations) + ',' + std::to_string(rep.results.size()) + '\n';

              ojson j;
              j["target"] = std::string(target_name(rep.target));
              j["seed_index"] = i;
              j["seed_label"] = rep.seed_label;
              j["ga_seed"] = run_cfg.seed;
              j["success"] = rep.success;
              j["generations"] = rep.generations;
              j["results"] = ojson::array();
              for (std::size_t k = 0; k < rep.results.size(); ++k) {
                const auto& ind = rep.results[k];
                ojson r{{"fitness", ind.fitness},
                        {"generation", ind.generation},
                        {"is_adversarial", ind.is_adversarial},
                        {"linf", linf_distance(ind.image, x)},
                        {"pattern", std::string(pattern_name(categorize(ind.profile, cfg.thresholds)))},
                        {"profile", profile_json(ind.profile)}};
                if (rep.success) {
                  r["image_index"] = images.size();
                  const std::string id = "seed" + padded(i) + "-" + std::to_string(k);
                  rows.push_back(make_report_row(id, std::string(target_name(cfg.target)), label, ind.profile,
                                                 cfg.thresholds));
                  images.push_back(ind.image);
                  labels.push_back(label);
                }
                j["results"].push_back(r);
              }
              j["trace"] = ojson::array();
              for (const auto& g : rep.trace) {
                j["trace"].push_back({{"generation", g.generation},
                                      {"branch", g.branch},
                                      {"best_fitness", g.best_fitness},
                                      {"mean_fitness", g.mean_fitness},
                                      {"min_pcs", g.min_pcs},
                                      {"max_pcs", g.max_pcs},
                                      {"adversarial", g.adversarial},
                                      {"satisfied", g.satisfied}});
              }
              json_files.emplace_back("seed-" + padded(i) + ".json", j.dump(2) + "\n");
              ctx.err << "seed " << i << ": " << (rep.success ? "satisfied" : "not satisfied") << " after "
                      << rep.generations << " generations, " << (rep.success ? rep.results.size() : 0) << " outputs\n";
            }

            const std::filesystem::path dir(o->out);
            std::filesystem::create_directories(dir);
            for (const auto& [name, text] : json_files) {
              write_file_atomic(dir / name, text);
              m.output(dir / name);
            }
            write_file_atomic(dir / "seeds.csv", seeds_csv);
            m.output(dir / "seeds.csv");
            emit_report(rows, dir / "generated.csv");
            m.output(dir / "generated.csv");
            write_idx_pair(images, labels, dir, "generated", m, ctx);
            m.write(manifest_for_dir(dir));
            ctx.out << target_name(cfg.target) << ": " << successes << " of " << json_files.size()
                    << " seeds satisfied, " << images.size() << " outputs\n";
            return kExitOk;
          }};
}

Command add_defend(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string model, benign, adv, calib_benign, calib_adv, detector, dataset = "eval", verdicts, out;
    std::optional<double> threshold;
    std::size_t mutations = 100, jobs = 1, logit_epochs = 50, logit_batch = 8;
    double noise_eps = 0.05, logit_lr = 0.1;
    int bit_depth = 4;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("defend", "Success rate of a detector on a benign and an adversarial set");
  sub->add_option("--model", o->model)->required();
  sub->add_option("--detector", o->detector, "mutation, logit or squeeze")->required();
  sub->add_option("--benign", o->benign, "Benign evaluation set")->required();
  sub->add_option("--adv", o->adv, "Adversarial evaluation set")->required();
  sub->add_option("--calib-benign", o->calib_benign, "Benign calibration set (threshold sweep, logit training)");
  sub->add_option("--calib-adv", o->calib_adv, "Adversarial calibration set");
  sub->add_option("--threshold", o->threshold, "Fixed threshold instead of calibration (logit default 0.5)");
  sub->add_option("--mutations", o->mutations, "Mutation detector: noised copies per input")->capture_default_str();
  sub->add_option("--noise-eps", o->noise_eps, "Mutation detector: uniform noise half-width")->capture_default_str();
  sub->add_option("--bit-depth", o->bit_depth, "Squeeze detector: bits per pixel, 1..7")->capture_default_str();
  sub->add_option("--logit-epochs", o->logit_epochs)->capture_default_str();
  sub->add_option("--logit-lr", o->logit_lr)->capture_default_str();
  sub->add_option("--logit-batch", o->logit_batch)->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--jobs", o->jobs)->capture_default_str();
  sub->add_option("--dataset", o->dataset, "Value of the dataset column")->capture_default_str();
  sub->add_option("--verdicts", o->verdicts, "Also write per-sample verdicts CSV");
  sub->add_option("--out", o->out, "Defense report CSV")->required();
  return {sub, [o, &ctx] {
            if (o->detector != "mutation" && o->detector != "logit" && o->detector != "squeeze") {
              throw ConfigError("--detector must be mutation, logit or squeeze");
            }
            const bool has_calib = !o->calib_benign.empty() && !o->calib_adv.empty();
            if (o->calib_benign.empty() != o->calib_adv.empty()) {
              throw ConfigError("--calib-benign and --calib-adv go together");
            }
            if (o->detector == "logit" && !has_calib) throw ConfigError("the logit detector needs calibration sets to train on");
            if (o->detector != "logit" && !has_calib && !o->threshold) {
              throw ConfigError("give --threshold or calibration sets");
            }
            if (o->detector == "squeeze" && (o->bit_depth < 1 || o->bit_depth > 7)) {
              throw ConfigError("--bit-depth must be in [1, 7]");
            }
            if (o->dataset.empty() || o->dataset.find_first_of(",\n\"") != std::string::npos) {
              throw ConfigError("--dataset must be non-empty and free of commas and quotes");
            }

            RunManifest m("defend");
            m.set_path("model", o->model);
            m.set("detector", o->detector);
            m.set_path("benign", o->benign);
            m.set_path("adv", o->adv);
            if (has_calib) {
              m.set_path("calib-benign", o->calib_benign);
              m.set_path("calib-adv", o->calib_adv);
            }
            if (o->threshold) m.set("threshold", *o->threshold);
            m.set("mutations", o->mutations);
            m.set("noise-eps", o->noise_eps);
            m.set("bit-depth", o->bit_depth);
            m.set("logit-epochs", o->logit_epochs);
            m.set("logit-lr", o->logit_lr);
            m.set("logit-batch", o->logit_batch);
            m.set("seed", o->seed);
            m.set("jobs", o->jobs);
            m.set("dataset", o->dataset);
            if (!o->verdicts.empty()) m.set_path("verdicts", o->verdicts);
            m.set_path("out", o->out);
            m.seed("mutation_noise", o->seed,
                   "sample key k uses RngStream(seed, derive_stream_id(0x6d7574, k)); evaluation benign i -> i, "
                   "adversarial j -> 2^32 + j, calibration keys add 2^40");
            m.seed("logit_training", o->seed, "RngStream(seed, 2)");

            const auto net = load_model(o->model);
            const auto benign = load_dataset_spec(o->benign);
            const auto adv = load_dataset_spec(o->adv);
            check_input_shape(net, benign, "--benign");
            check_input_shape(net, adv, "--adv");
            m.input(o->model);
            m.input(o->benign);
            m.input(o->adv);
            std::vector<Tensor> cb, ca;
            if (has_calib) {
              const auto b = load_dataset_spec(o->calib_benign);
              const auto a = load_dataset_spec(o->calib_adv);
              check_input_shape(net, b, "--calib-benign");
              check_input_shape(net, a, "--calib-adv");
              cb = samples_of(b);
              ca = samples_of(a);
              m.input(o->calib_benign);
              m.input(o->calib_adv);
            }

            Detector det;
            if (o->detector == "mutation") {
              det = make_mutation_detector(net, {o->mutations, o->noise_eps}, o->seed, 0.0);
            } else if (o->detector == "squeeze") {
              det = make_squeeze_detector(net, o->bit_depth, 0.0);
            } else {
              std::vector<Tensor> feats;
              std::vector<std::size_t> labs;
              for (const auto& x : cb) {
                feats.push_back(logits(net, x));
                labs.push_back(0);
              }
              for (const auto& x : ca) {
                feats.push_back(logits(net, x));
                labs.push_back(1);
              }
              TrainOptions topt;
              topt.epochs = o->logit_epochs;
              topt.lr = static_cast<float>(o->logit_lr);
              topt.batch_size = o->logit_batch;
              RngStream rng(o->seed, 2);
              auto clf = LogitClassifier::train(feats, labs, topt, rng);
              ctx.out << "logit classifier held-out accuracy " << format_real(clf.heldout_accuracy()) << "\n";
              det = make_logit_detector(net, std::move(clf), 0.5);
            }
            if (o->threshold) {
              det.threshold = *o->threshold;
            } else if (o->detector != "logit") {
              constexpr std::uint64_t kCalibKeys = std::uint64_t{1} << 40;
              const auto sb = score_set(det.score, cb, kCalibKeys, o->jobs);
              const auto sa = score_set(det.score, ca, kCalibKeys + kAdvKeyOffset, o->jobs);
              det.threshold = calibrate_threshold(sb, sa);
            }

            const auto eb = samples_of(benign);
            const auto ea = samples_of(adv);
            const auto sb = score_set(det.score, eb, 0, o->jobs);
            const auto sa = score_set(det.score, ea, kAdvKeyOffset, o->jobs);
            const auto vb = verdicts_from_scores(sb, det.name, det.threshold, "benign-");
            const auto va = verdicts_from_scores(sa, det.name, det.threshold, "adv-");
            const DefenseReport rep = aggregate_verdicts(vb, va, o->dataset);

            write_file_atomic(o->out, defense_csv(std::span<const DefenseReport>(&rep, 1)));
            m.output(o->out);
            if (!o->verdicts.empty()) {
              std::string v = "sample_id,detector,score,flagged,threshold\n";
              for (const auto* set : {&vb, &va}) {
                for (const auto& x : *set) {
                  v += x.sample_id + ',' + x.detector + ',' + format_real(x.score) + ',' + (x.flagged ? "1" : "0") +
                       ',' + format_real(x.threshold) + '\n';
                }
              }
              write_file_atomic(o->verdicts, v);
              m.output(o->verdicts);
            }
            m.write(manifest_for_file(o->out));
            ctx.out << det.name << " threshold " << format_real(det.threshold) << ": benign " << rep.success_benign
                    << ", adversarial " << rep.success_adv << ", combined " << rep.success_combined << "\n";
            return kExitOk;
          }};
}

}  // namespace uqf::cli
