#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <CLI11.hpp>

namespace lrg::cli {

struct Globals {
  int threads = 0;  // 0 = OpenMP default
  std::uint64_t seed = 0;
  std::string command_line;
};

/// Registers every subcommand on `app`. Parsing a subcommand stores its work
/// in `action`; the caller runs it after parsing succeeds.
void add_commands(CLI::App& app, Globals& globals, std::function<void()>& action);

/// `path` if it exists, otherwise $LRG_DATA_DIR/`path` when that exists.
std::string resolve_dataset(const std::string& path);

}  // namespace lrg::cli
