#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace lrg::cli {

/// 64-bit FNV-1a of a file's bytes.
std::uint64_t fnv1a_file(const std::filesystem::path& path);

/// Record of one CLI invocation, written as manifest.json next to its outputs.
/// Timestamps appear only here so data artifacts stay byte-reproducible.
class RunManifest {
 public:
  RunManifest(std::string command_line, std::string subcommand);

  void set_config(nlohmann::ordered_json config) { config_ = std::move(config); }
  void add_input(const std::filesystem::path& file);

  /// Hashes the dataset files present in `dir`.
  void add_dataset(const std::filesystem::path& dir);
  void add_output(const std::filesystem::path& file);

  /// Writes `dir`/manifest.json and returns its path.
  std::filesystem::path write(const std::filesystem::path& dir) const;

 private:
  std::string command_line_;
  std::string subcommand_;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::object();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::chrono::system_clock::time_point started_at_ = std::chrono::system_clock::now();
};

}  // namespace lrg::cli
