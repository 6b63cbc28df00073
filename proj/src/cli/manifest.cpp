#include "manifest.hpp"

#include "uqf/error.hpp"
#include "uqf/kernels.hpp"
#include "uqf/model_io.hpp"

#ifndef UQF_VERSION
#define UQF_VERSION "0.0.0"
#endif

namespace uqf::cli {

RunManifest::RunManifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

std::string absolute_spec(const std::string& value) {
  std::string out;
  std::size_t start = 0;
  while (true) {
    const auto comma = value.find(',', start);
    const std::string part = value.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!out.empty() || start > 0) out += ',';
    out += part.empty() ? part : std::filesystem::absolute(part).lexically_normal().string();
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void RunManifest::set_path(const std::string& flag, const std::string& value) { config_[flag] = absolute_spec(value); }

void RunManifest::seed(const std::string& name, std::uint64_t value, const std::string& derivation) {
  seeds_[name] = {{"value", value}, {"derivation", derivation}};
}

ojson RunManifest::to_json() const {
  ojson j;
  j["command"] = command_;
  j["tool_version"] = std::string("uqf ") + UQF_VERSION;
  j["kernels"] = std::string(kernels::backend_name(kernels::active_backend()));
  j["config"] = config_;
  j["rng"] = seeds_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  j["duration_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  return j;
}

void RunManifest::write(const std::filesystem::path& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

std::filesystem::path manifest_for_file(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".manifest.json");
}

std::filesystem::path manifest_for_dir(const std::filesystem::path& dir) { return dir / "manifest.json"; }

std::vector<std::string> replay_args(const ojson& manifest, const ojson& overrides) {
  if (!manifest.is_object() || !manifest.contains("command") || !manifest["command"].is_string() ||
      !manifest.contains("config") || !manifest["config"].is_object()) {
    throw ConfigError("manifest needs a 'command' string and a 'config' object");
  }
  std::vector<std::string> args{manifest["command"].get<std::string>()};
  if (manifest.contains("kernels") && manifest["kernels"].is_string()) {
    args.push_back("--kernels");
    args.push_back(manifest["kernels"].get<std::string>());
  }
  ojson config = manifest["config"];
  for (const auto& [k, v] : overrides.items()) {
    if (!config.contains(k)) throw ConfigError("command '" + args[0] + "' has no --" + k + " option to override");
    config[k] = v;
  }
  for (const auto& [k, v] : config.items()) {
    if (v.is_null()) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) args.push_back("--" + k);
      continue;
    }
    args.push_back("--" + k);
    args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  }
  return args;
}

}  // namespace uqf::cli
