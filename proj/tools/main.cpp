#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <omp.h>

#include "commands.hpp"
#include "lrg/errors.hpp"

namespace {

constexpr int kExitIo = 2;
constexpr int kExitAnalysis = 3;
constexpr int kExitUsage = 64;

int exit_code(const lrg::Error& e) {
  switch (e.category()) {
    case lrg::Error::Category::Io: return kExitIo;
    case lrg::Error::Category::Analysis: return kExitAnalysis;
    case lrg::Error::Category::Usage: return kExitUsage;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplacian renormalization of graphs and multi-scale node classification", "lrg"};
  app.set_version_flag("--version", LRG_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML config file; [subcommand] sections, flags override it");

  lrg::cli::Globals globals;
  for (int k = 0; k < argc; ++k) globals.command_line += (k ? " " : "") + std::string(argv[k]);
  app.add_option("--seed", globals.seed, "Master seed: training seeds start here; split and sampler streams use it");
  app.add_option("--threads", globals.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

  std::function<void()> action;
  lrg::cli::add_commands(app, globals, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (globals.threads > 0) omp_set_num_threads(globals.threads);
  try {
    action();
  } catch (const lrg::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitIo;
  } catch (const std::system_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
