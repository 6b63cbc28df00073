#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace uqf::cli {

using ojson = nlohmann::ordered_json;

std::string absolute_spec(const std::string& value);

/// Everything needed to re-run a command: the resolved flags in `config` are
/// turned back into a command line by `replay`.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  template <class T>
  void set(const std::string& flag, const T& value) {
    config_[flag] = value;
  }
  /// Records a path flag made absolute; comma-separated pairs are handled per part.
  void set_path(const std::string& flag, const std::string& value);
  void input(const std::filesystem::path& p) { inputs_.push_back(absolute_spec(p.string())); }
  void output(const std::filesystem::path& p) { outputs_.push_back(absolute_spec(p.string())); }
  void seed(const std::string& name, std::uint64_t value, const std::string& derivation);

  ojson to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  ojson config_ = ojson::object();
  ojson seeds_ = ojson::object();
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

/// Manifest location for an output file (`<file>.manifest.json`) or directory (`<dir>/manifest.json`).
std::filesystem::path manifest_for_file(const std::filesystem::path& out);
std::filesystem::path manifest_for_dir(const std::filesystem::path& dir);

/// Command line reconstructed from a manifest, with optional overrides of config flags.
std::vector<std::string> replay_args(const ojson& manifest, const ojson& overrides);

}  // namespace uqf::cli
