#include "manifest.hpp"

#include <array>
#include <fstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "lrg/errors.hpp"

namespace lrg::cli {

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(k)]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

RunManifest::RunManifest(std::string command_line, std::string subcommand)
    : command_line_(std::move(command_line)), subcommand_(std::move(subcommand)) {}

void RunManifest::add_input(const std::filesystem::path& file) {
  inputs_[file.string()] = fmt::format("fnv1a64:{:016x}", fnv1a_file(file));
}

void RunManifest::add_dataset(const std::filesystem::path& dir) {
  for (const char* name : {"edges.tsv", "features.csv", "labels.csv", "masks.csv"}) {
    if (std::filesystem::exists(dir / name)) add_input(dir / name);
  }
}

void RunManifest::add_output(const std::filesystem::path& file) { outputs_.push_back(file.string()); }

std::filesystem::path RunManifest::write(const std::filesystem::path& dir) const {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  const nlohmann::ordered_json doc{
      {"command", command_line_},
      {"subcommand", subcommand_},
      {"config", config_},
      {"inputs", inputs_},
      {"outputs", outputs_},
      {"started_at", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(started_at_)))},
      {"wall_clock_seconds", seconds},
      {"version", LRG_VERSION}};
  std::filesystem::create_directories(dir);
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw MissingFile(path.string());
  out << doc.dump(2) << '\n';
  return path;
}

}  // namespace lrg::cli
