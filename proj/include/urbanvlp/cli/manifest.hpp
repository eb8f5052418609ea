#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "urbanvlp/io/encoding.hpp"
#include "urbanvlp/numerics/errors.hpp"

namespace urbanvlp::cli {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFile = "manifest.json";

/// Record of one command invocation, written next to its outputs.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed)
      : command_(std::move(command)), seed_(seed), start_(std::chrono::steady_clock::now()) {}

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_input(const std::string& name, const fs::path& path) {
    inputs_[name] = {{"path", path.string()}, {"hash", io::content_hash(path)}};
  }
  void set_summary(nlohmann::json summary) { summary_ = std::move(summary); }

  /// Hashes every file under `out` (except the manifest itself) and writes
  /// manifest.json there.
  void write(const fs::path& out) const {
    nlohmann::json outputs = nlohmann::json::object();
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(out))
      if (e.is_regular_file() && e.path().filename() != kManifestFile) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) outputs[fs::relative(f, out).generic_string()] = io::content_hash(f);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json j{{"command", command_},
                     {"seed", seed_},
                     {"config", config_},
                     {"inputs", inputs_},
                     {"output_dir", out.string()},
                     {"outputs", outputs},
                     {"duration_seconds", secs}};
    if (!summary_.is_null()) j["summary"] = summary_;
    io::write_file(out / kManifestFile, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  std::chrono::steady_clock::time_point start_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::object();
  nlohmann::json summary_;
};

/// Creates `out`. An existing non-empty directory is an error unless
/// `force`, in which case its contents are removed first.
inline void prepare_output_dir(const fs::path& out, bool force) {
  if (out.empty()) throw UsageError("--out is required");
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw UsageError(out.string() + " exists and is not a directory");
    if (!fs::is_empty(out)) {
      if (!force) throw UsageError(out.string() + " is not empty (use --force to overwrite)");
      for (const auto& e : fs::directory_iterator(out)) fs::remove_all(e.path());
    }
  }
  fs::create_directories(out);
}

}  // namespace urbanvlp::cli
