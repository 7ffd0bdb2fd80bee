#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include <json.hpp>

#include "lrg/graph.hpp"
#include "test_support.hpp"

using namespace lrg;
using namespace lrg::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const fs::path& cwd, const std::string& args, const std::string& env = "") {
  const std::string cmd =
      "cd '" + cwd.string() + "' && " + env + " '" LRG_BIN "' " + args + " >stdout.txt 2>stderr.txt";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return {WEXITSTATUS(status), read_file(cwd / "stdout.txt"), read_file(cwd / "stderr.txt")};
}

void write_k2(const fs::path& dir) {
  Graph g = complete_graph(2);
  save_dataset(Dataset{g, std::nullopt}, dir);
}

}  // namespace

TEST_CASE("help and usage errors") {
  TempDir tmp;
  CHECK(run(tmp.path(), "--help").code == 0);
  for (const char* sub : {"generate-sbm", "analyze", "renormalize", "train", "compare", "random-control"}) {
    const Result r = run(tmp.path(), std::string(sub) + " --help");
    CHECK(r.code == 0);
    CHECK(r.out.find("Usage") != std::string::npos);
    CHECK(run(tmp.path(), std::string(sub) + " --no-such-flag").code == 64);
  }
  CHECK(run(tmp.path(), "").code == 64);
  CHECK(run(tmp.path(), "frobnicate").code == 64);
  CHECK(run(tmp.path(), "analyze").code == 64);  // --graph is required
}

TEST_CASE("analyze") {
  TempDir tmp;
  write_k2(tmp.path() / "k2");
  SUBCASE("K2 has one peak and starts at maximal entropy") {
    const Result r = run(tmp.path(), "analyze --graph k2 --out scan");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("tau_star") != std::string::npos);
    const std::string peaks = read_file(tmp.path() / "scan" / "peaks.csv");
    CHECK(std::count(peaks.begin(), peaks.end(), '\n') == 2);  // header + one peak
    const std::string scan = read_file(tmp.path() / "scan" / "scan.csv");
    const auto first = scan.substr(scan.find('\n') + 1);
    const double s0 = std::stod(first.substr(first.find(',') + 1));
    CHECK(s0 > 0.999);
    CHECK(fs::exists(tmp.path() / "scan" / "manifest.json"));
  }
  SUBCASE("exit codes") {
    CHECK(run(tmp.path(), "analyze --graph k2 --tau-min 10 --tau-max 1").code == 64);
    CHECK(run(tmp.path(), "analyze --graph missing").code == 2);
    CHECK(run(tmp.path(), "analyze --graph k2 --tau-min 1e-3 --tau-max 2e-3 --points 20").code == 3);
    write_file(tmp.path() / "k2" / "edges.tsv", "0 x\n");
    const Result bad = run(tmp.path(), "analyze --graph k2");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("edges.tsv:1") != std::string::npos);
  }
  SUBCASE("LRG_DATA_DIR is the default dataset root") {
    TempDir elsewhere;
    REQUIRE(run(tmp.path(), "analyze --graph k2 --out a").code == 0);
    CHECK(run(elsewhere.path(), "analyze --graph k2 --out b").code == 2);
    const std::string env = "LRG_DATA_DIR='" + tmp.path().string() + "'";
    REQUIRE(run(elsewhere.path(), "analyze --graph k2 --out '" + (tmp.path() / "b").string() + "'", env).code == 0);
    CHECK(read_file(tmp.path() / "a" / "scan.csv") == read_file(tmp.path() / "b" / "scan.csv"));
  }
}

TEST_CASE("renormalize") {
  TempDir tmp;
  REQUIRE(run(tmp.path(), "generate-sbm --out sbm --nodes 40 --blocks 2 --p-in 0.4 --p-out 0.05 --split --seed 2")
              .code == 0);
  const Graph base = largest_connected_component(load_graph(tmp.path() / "sbm"));

  SUBCASE("huge tau keeps every node apart") {
    const Result r = run(tmp.path(), "renormalize --graph sbm --tau 1e9 --out big");
    REQUIRE(r.code == 0);
    const auto prov = nlohmann::json::parse(read_file(tmp.path() / "big" / "provenance.json"));
    CHECK(prov["n_macro"] == base.n_nodes);
    CHECK(prov["edges_after"] == prov["edges_before"]);
    CHECK(load_graph(tmp.path() / "big") == base);
  }
  SUBCASE("auto scale is reproducible and the output reloads") {
    REQUIRE(run(tmp.path(), "renormalize --graph sbm --auto --out a").code == 0);
    REQUIRE(run(tmp.path(), "--threads 1 renormalize --graph sbm --auto --out b").code == 0);
    for (const char* f : {"edges.tsv", "features.csv", "labels.csv", "masks.csv", "partition.csv", "provenance.json"}) {
      CHECK(read_file(tmp.path() / "a" / f) == read_file(tmp.path() / "b" / f));
    }
    const Dataset d = load_dataset(tmp.path() / "a");
    CHECK(d.graph.n_nodes == base.n_nodes);
    CHECK(d.split.has_value());
    const std::string partition = read_file(tmp.path() / "a" / "partition.csv");
    CHECK(partition.rfind("node_id,macro_id\n", 0) == 0);
    const auto manifest = nlohmann::json::parse(read_file(tmp.path() / "a" / "manifest.json"));
    CHECK(manifest["subcommand"] == "renormalize");
    CHECK(manifest["inputs"].size() == 4);
    CHECK(manifest["outputs"].size() == 6);
  }
  SUBCASE("invalid scales") {
    CHECK(run(tmp.path(), "renormalize --graph sbm --tau 0 --out z").code == 64);
    CHECK(run(tmp.path(), "renormalize --graph sbm --tau -1 --out z").code == 64);
    CHECK(run(tmp.path(), "renormalize --graph sbm --out z").code == 64);
    CHECK(run(tmp.path(), "renormalize --graph sbm --tau 1 --auto --out z").code == 64);
  }
}

TEST_CASE("train, compare and random-control") {
  TempDir tmp;
  REQUIRE(run(tmp.path(), "generate-sbm --out sbm --nodes 60 --blocks 3 --p-in 0.3 --p-out 0.02 --seed 1").code == 0);
  const std::string fast = " --epochs 30 --lr 1e-2 --hidden 8 --out-dim 8 --seeds 3";

  const Result mr = run(tmp.path(), "train --dataset sbm --variant MR" + fast + " --out mr");
  REQUIRE(mr.code == 0);
  CHECK(mr.out.find("mean test accuracy") != std::string::npos);
  const std::string results = read_file(tmp.path() / "mr" / "results.csv");
  CHECK(results.rfind("variant,dataset,seed,test_accuracy,checkpoint_epoch\n", 0) == 0);
  CHECK(std::count(results.begin(), results.end(), '\n') == 4);

  REQUIRE(run(tmp.path(), "--threads 1 train --dataset sbm --variant MR" + fast + " --out mr2").code == 0);
  for (const char* f : {"results.csv", "scores.csv", "curves.csv", "epochs.jsonl", "run.json"}) {
    CHECK(read_file(tmp.path() / "mr" / f) == read_file(tmp.path() / "mr2" / f));
  }

  REQUIRE(run(tmp.path(), "train --dataset sbm --variant MB" + fast + " --out mb").code == 0);
  const Result cmp = run(tmp.path(), "compare --a mr --b mb --alt greater --out cmp");
  REQUIRE(cmp.code == 0);
  CHECK(cmp.out.find("verdict ") != std::string::npos);
  const std::string rows = read_file(tmp.path() / "cmp" / "comparisons.csv");
  CHECK(rows.rfind("variant_a,variant_b,alternative,p_value,verdict\nGCN_MR,GCN_MB,greater,", 0) == 0);

  const Result self = run(tmp.path(), "compare --a mr --b mr2 --out self");
  CHECK(self.out.find("verdict =") != std::string::npos);

  REQUIRE(run(tmp.path(), "--seed 5 train --dataset sbm --variant MB" + fast + " --out shifted").code == 0);
  CHECK(run(tmp.path(), "compare --a mr --b shifted").code == 64);  // different seed lists
  CHECK(run(tmp.path(), "compare --a mr --b nowhere").code == 2);
  CHECK(run(tmp.path(), "train --dataset sbm --variant XX --out bad").code == 64);
  CHECK(run(tmp.path(), "train --dataset sbm --variant SB --taus 1 --out bad").code == 64);

  const Result rc = run(tmp.path(), "random-control --dataset sbm --range 0,1 --samples 2 --epochs 10 --lr 1e-2 "
                                    "--hidden 8 --out-dim 8 --seeds 2 --out rc");
  REQUIRE(rc.code == 0);
  const auto report = nlohmann::json::parse(read_file(tmp.path() / "rc" / "control_report.json"));
  CHECK(report["p_values"].size() == 2);
  CHECK(report["bonferroni_threshold"].get<double>() == doctest::Approx(0.05 / 6.0));
  CHECK(fs::exists(tmp.path() / "rc" / "reference" / "results.csv"));
  CHECK(run(tmp.path(), "random-control --dataset sbm --range 1 --out rc2").code == 64);
}

TEST_CASE("config file layering") {
  TempDir tmp;
  REQUIRE(run(tmp.path(), "generate-sbm --out sbm --nodes 30 --seed 3").code == 0);
  write_file(tmp.path() / "run.toml", "[train]\nepochs = 4\nseeds = 2\nlr = 0.01\n");
  REQUIRE(run(tmp.path(), "--config run.toml train --dataset sbm --out a --epochs 6").code == 0);
  const std::string results = read_file(tmp.path() / "a" / "results.csv");
  CHECK(std::count(results.begin(), results.end(), '\n') == 3);
  const std::string curves = read_file(tmp.path() / "a" / "curves.csv");
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 1 + 2 * 6);
}
