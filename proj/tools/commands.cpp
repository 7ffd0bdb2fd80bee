#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <fmt/os.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "lrg/errors.hpp"
#include "lrg/experiment.hpp"
#include "lrg/graph.hpp"
#include "lrg/renorm.hpp"
#include "lrg/sbm.hpp"
#include "lrg/spectral.hpp"
#include "manifest.hpp"

namespace lrg::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string resolve_dataset(const std::string& path) {
  if (fs::exists(path)) return path;
  if (const char* root = std::getenv("LRG_DATA_DIR")) {
    const fs::path candidate = fs::path(root) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

namespace {

ordered_json resolved_config(const CLI::App& sub, const Globals& g) {
  ordered_json cfg{{"seed", g.seed}, {"threads", g.threads}};
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& values = opt->results();
      cfg[name] = values.size() == 1 ? ordered_json(values.front()) : ordered_json(values);
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

void check_scan_range(double tau_min, double tau_max, int points) {
  if (!(tau_min > 0.0 && tau_max > tau_min)) {
    throw InvalidRange(fmt::format("need 0 < --tau-min < --tau-max, got [{}, {}]", tau_min, tau_max));
  }
  if (points < 8) throw InvalidRange("--points must be at least 8");
}

struct ScanFlags {
  double tau_min = kDefaultTauMin;
  double tau_max = kDefaultTauMax;
  int points = kDefaultScanPoints;

  void add(CLI::App* sub) {
    sub->add_option("--tau-min", tau_min, "Smallest diffusion time of the scan grid");
    sub->add_option("--tau-max", tau_max, "Largest diffusion time of the scan grid");
    sub->add_option("--points", points, "Number of log-spaced grid points");
  }
};

struct TrainFlags {
  std::string dataset;
  std::string encoder = "gcn";
  int seeds = kDefaultSeedCount;
  std::uint64_t split_seed = 0;
  int epochs = 1000;
  double lr = 1e-4;
  int hidden = 64;
  int out_dim = 64;
  int heads = 1;
  ScanFlags scan;
  CLI::Option* split_seed_opt = nullptr;

  void add(CLI::App* sub) {
    sub->add_option("--dataset,--graph", dataset, "Dataset directory (relative paths also tried under $LRG_DATA_DIR)")
        ->required();
    sub->add_option("--encoder", encoder, "Encoder kind: gcn or gat");
    sub->add_option("--seeds", seeds, "Number of training seeds, starting at --seed")->check(CLI::PositiveNumber);
    split_seed_opt = sub->add_option("--split-seed", split_seed,
                                     "Seed of the stratified split when the dataset has no masks (default: --seed)");
    sub->add_option("--epochs", epochs, "Full-batch training epochs")->check(CLI::PositiveNumber);
    sub->add_option("--lr", lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
    sub->add_option("--hidden", hidden, "Hidden width of each encoder")->check(CLI::PositiveNumber);
    sub->add_option("--out-dim", out_dim, "Output width of each encoder")->check(CLI::PositiveNumber);
    sub->add_option("--heads", heads, "Attention heads (gat)")->check(CLI::PositiveNumber);
    scan.add(sub);
  }

  ExperimentConfig config(const Globals& g, Variant variant) const {
    ExperimentConfig c;
    c.dataset = fs::path(dataset).filename().string();
    if (c.dataset.empty()) c.dataset = fs::path(dataset).parent_path().filename().string();
    c.encoder = parse_encoder_kind(encoder);
    c.variant = variant;
    c.seeds = seed_range(g.seed, seeds);
    c.split_seed = split_seed_opt->count() > 0 ? split_seed : g.seed;
    c.hidden_dim = hidden;
    c.out_dim = out_dim;
    c.gat_heads = heads;
    c.train.epochs = epochs;
    c.train.adam.lr = lr;
    c.tau_min = scan.tau_min;
    c.tau_max = scan.tau_max;
    c.scan_points = scan.points;
    check_scan_range(c.tau_min, c.tau_max, c.scan_points);
    return c;
  }
};

void print_run_summary(const VariantRun& run) {
  for (std::size_t s = 0; s < run.records.size(); ++s) {
    const auto& r = run.records[s];
    fmt::print("seed {}: test_accuracy {:.4f} (checkpoint epoch {})\n", r.seed, r.test_accuracy, r.checkpoint_epoch);
  }
  if (!run.inputs.taus.empty()) fmt::print("scales: {}\n", fmt::join(run.inputs.taus, ", "));
  fmt::print("{} mean test accuracy {:.4f} over {} seeds\n", run.scores.variant, run.scores.mean_accuracy(),
             run.records.size());
}

ordered_json resolved_run(const VariantRun& run) {
  return ordered_json{{"seeds", run.config.seeds},
                      {"split_seed", run.config.split_seed},
                      {"n_encoders", run.inputs.slots.size()},
                      {"taus", run.inputs.taus}};
}

void record_run_outputs(RunManifest& m, const fs::path& out) {
  for (const char* name : {"results.csv", "scores.csv", "curves.csv", "epochs.jsonl", "run.json"}) {
    m.add_output(out / name);
  }
}

ScaleRange parse_range(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw InvalidRange("--range expects 'lo,hi', got '" + text + "'");
  try {
    return ScaleRange{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::logic_error&) {
    throw InvalidRange("--range expects two numbers, got '" + text + "'");
  }
}

// ---------------------------------------------------------------- commands

void add_generate_sbm(CLI::App& app, Globals& g, std::function<void()>& action) {
  auto* sub = app.add_subcommand("generate-sbm", "Write a planted-partition SBM dataset");
  auto opt = std::make_shared<SbmConfig>();
  auto out = std::make_shared<std::string>();
  auto with_split = std::make_shared<bool>(false);
  opt->n_blocks = 2;
  sub->add_option("--out", *out, "Output dataset directory")->required();
  sub->add_option("--nodes", opt->n_nodes, "Number of nodes")->check(CLI::PositiveNumber);
  sub->add_option("--blocks", opt->n_blocks, "Number of blocks (= classes)")->check(CLI::PositiveNumber);
  sub->add_option("--p-in", opt->p_in, "Edge probability within a block")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--p-out", opt->p_out, "Edge probability across blocks")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--features", opt->feature_dim, "Feature dimension")->check(CLI::PositiveNumber);
  sub->add_option("--signal", opt->signal, "Scale of the per-block feature centroids (0 = pure noise)");
  sub->add_flag("--split", *with_split, "Also write a stratified 60/20/20 masks.csv");
  sub->callback([&, sub, opt, out, with_split] {
    action = [&, sub, opt, out, with_split] {
      RunManifest m(g.command_line, "generate-sbm");
      m.set_config(resolved_config(*sub, g));
      Dataset d{generate_sbm(*opt, g.seed), std::nullopt};
      if (*with_split) d.split = stratified_split(d.graph.labels, g.seed);
      save_dataset(d, *out);
      for (const char* name : {"edges.tsv", "features.csv", "labels.csv"}) m.add_output(fs::path(*out) / name);
      if (d.split) m.add_output(fs::path(*out) / "masks.csv");
      m.write(*out);
      fmt::print("wrote {} ({} nodes, {} edges, {} classes)\n", *out, d.graph.n_nodes, d.graph.n_edges(),
                 d.graph.n_classes());
    };
  });
}

void add_analyze(CLI::App& app, Globals& g, std::function<void()>& action) {
  auto* sub = app.add_subcommand("analyze", "Entropy / heat-capacity scan and characteristic scales");
  auto dataset = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>(".");
  auto scan = std::make_shared<ScanFlags>();
  sub->add_option("--graph,--dataset", *dataset, "Dataset directory (relative paths also tried under $LRG_DATA_DIR)")
      ->required();
  sub->add_option("--out", *out, "Directory for scan.csv, peaks.csv and manifest.json");
  scan->add(sub);
  sub->callback([&, sub, dataset, out, scan] {
    action = [&, sub, dataset, out, scan] {
      check_scan_range(scan->tau_min, scan->tau_max, scan->points);
      RunManifest m(g.command_line, "analyze");
      m.set_config(resolved_config(*sub, g));
      const std::string dir = resolve_dataset(*dataset);
      const Graph lcc = largest_connected_component(load_graph(dir));
      m.add_dataset(dir);
      const EntropyScan result = entropy_scan(eigendecompose(laplacian(lcc)), scan->tau_min, scan->tau_max, scan->points);
      fs::create_directories(*out);
      write_scan_csv(result, fs::path(*out) / "scan.csv");
      m.add_output(fs::path(*out) / "scan.csv");
      const auto peaks = detect_peaks(result);
      write_peaks_csv(peaks, fs::path(*out) / "peaks.csv");
      m.add_output(fs::path(*out) / "peaks.csv");
      m.write(*out);
      fmt::print("nodes {} (largest component), edges {}\n", lcc.n_nodes, lcc.n_edges());
      for (std::size_t k = 0; k < peaks.size(); ++k) {
        fmt::print("peak {}: tau {:.6g} C {:.6g}\n", k + 1, peaks[k].tau, peaks[k].heat_capacity);
      }
      fmt::print("tau_star {:.6g}\n", peaks.front().tau);
    };
  });
}

void add_renormalize(CLI::App& app, Globals& g, std::function<void()>& action) {
  auto* sub = app.add_subcommand("renormalize", "Coarse-grain a graph at one diffusion time");
  auto dataset = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto tau = std::make_shared<double>(0.0);
  auto autoscale = std::make_shared<bool>(false);
  auto scan = std::make_shared<ScanFlags>();
  sub->add_option("--graph,--dataset", *dataset, "Dataset directory (relative paths also tried under $LRG_DATA_DIR)")
      ->required();
  sub->add_option("--out", *out, "Output dataset directory")->required();
  auto* tau_opt = sub->add_option("--tau", *tau, "Diffusion time");
  auto* auto_opt = sub->add_flag("--auto", *autoscale, "Use the top detected characteristic scale");
  tau_opt->excludes(auto_opt);
  scan->add(sub);
  sub->callback([&, sub, dataset, out, tau, autoscale, scan, tau_opt] {
    action = [&, sub, dataset, out, tau, autoscale, scan, tau_opt] {
      if (!*autoscale && tau_opt->count() == 0) throw InvalidConfig("renormalize needs --tau or --auto");
      if (!*autoscale && !(*tau > 0.0)) throw NegativeTau(*tau);
      if (*autoscale) check_scan_range(scan->tau_min, scan->tau_max, scan->points);
      RunManifest m(g.command_line, "renormalize");
      m.set_config(resolved_config(*sub, g));
      const std::string dir = resolve_dataset(*dataset);
      const Dataset lcc = largest_connected_component(load_dataset(dir));
      m.add_dataset(dir);
      const LaplacianSpectrum spectrum = eigendecompose(laplacian(lcc.graph));
      double scale = *tau;
      if (*autoscale) {
        scale = detect_peaks(entropy_scan(spectrum, scan->tau_min, scan->tau_max, scan->points)).front().tau;
      }
      const RenormalizedGraph r = renormalize_at(lcc.graph, spectrum, scale);

      const fs::path dst(*out);
      save_dataset(Dataset{r.graph, lcc.split}, dst);
      for (const char* name : {"edges.tsv", "features.csv", "labels.csv"}) m.add_output(dst / name);
      if (lcc.split) m.add_output(dst / "masks.csv");
      {
        auto f = fmt::output_file((dst / "partition.csv").string());
        f.print("node_id,macro_id\n");
        for (int i = 0; i < r.graph.n_nodes; ++i) f.print("{},{}\n", r.graph.node_ids[i], r.partition.assignment[i]);
      }
      m.add_output(dst / "partition.csv");
      const ordered_json provenance{{"tau", scale},
                                    {"auto", *autoscale},
                                    {"n_nodes", r.graph.n_nodes},
                                    {"n_macro", r.partition.n_macro},
                                    {"edges_before", lcc.graph.n_edges()},
                                    {"edges_after", r.graph.n_edges()}};
      std::ofstream(dst / "provenance.json") << provenance.dump(2) << '\n';
      m.add_output(dst / "provenance.json");
      m.write(dst);
      fmt::print("tau {:.6g}: {} nodes in {} macro-nodes, edges {} -> {}\n", scale, r.graph.n_nodes,
                 r.partition.n_macro, lcc.graph.n_edges(), r.graph.n_edges());
    };
  });
}

void add_train(CLI::App& app, Globals& g, std::function<void()>& action) {
  auto* sub = app.add_subcommand("train", "Train one model variant over several seeds");
  auto flags = std::make_shared<TrainFlags>();
  auto variant = std::make_shared<std::string>("SB");
  auto taus = std::make_shared<std::vector<double>>();
  auto n_encoders = std::make_shared<int>(0);
  auto out = std::make_shared<std::string>();
  flags->add(sub);
  sub->add_option("--variant", *variant, "SB, SR, MB or MR");
  sub->add_option("--taus", *taus, "Scales for renormalized slots (default: top detected scale)")->delimiter(',');
  sub->add_option("--n-encoders", *n_encoders, "Encoder count for multi-encoder variants (0 = default)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", *out, "Run directory")->required();
  sub->callback([&, sub, flags, variant, taus, n_encoders, out] {
    action = [&, sub, flags, variant, taus, n_encoders, out] {
      ExperimentConfig c = flags->config(g, parse_variant(*variant));
      c.taus = *taus;
      c.n_encoders = *n_encoders;
      RunManifest m(g.command_line, "train");
      m.set_config(resolved_config(*sub, g));
      const std::string dir = resolve_dataset(flags->dataset);
      const PreparedData data = prepare_dataset(load_dataset(dir), c.split_seed);
      m.add_dataset(dir);
      const VariantRun run = run_variant(c, data);
      ordered_json cfg = resolved_config(*sub, g);
      cfg["resolved"] = resolved_run(run);
      m.set_config(cfg);
      write_run(run, *out);
      record_run_outputs(m, *out);
      m.write(*out);
      print_run_summary(run);
      fmt::print("results: {}\n", (fs::path(*out) / "results.csv").string());
    };
  });
}

void add_compare(CLI::App& app, Globals& g, std::function<void()>& action) {
  auto* sub = app.add_subcommand("compare", "Paired Wilcoxon comparison of two run directories");
  auto a = std::make_shared<std::string>();
  auto b = std::make_shared<std::string>();
  auto alt = std::make_shared<std::string>("greater");
  auto alpha = std::make_shared<double>(kSignificance);
  auto out = std::make_shared<std::string>(".");
  sub->add_option("--a", *a, "Run directory of variant A")->required();
  sub->add_option("--b", *b, "Run directory of variant B")->required();
  sub->add_option("--alt", *alt, "Alternative for the reported p-value: greater (A > B) or less");
  sub->add_option("--alpha", *alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--out", *out, "Directory for comparisons.csv and manifest.json");
  sub->callback([&, sub, a, b, alt, alpha, out] {
    action = [&, sub, a, b, alt, alpha, out] {
      const Alternative alternative = parse_alternative(*alt);
      RunManifest m(g.command_line, "compare");
      m.set_config(resolved_config(*sub, g));
      const ScoreTable ta = read_score_table(*a);
      const ScoreTable tb = read_score_table(*b);
      for (const auto& dir : {*a, *b}) {
        m.add_input(fs::path(dir) / "results.csv");
        m.add_input(fs::path(dir) / "scores.csv");
      }
      const Comparison c = compare(ta, tb, alternative, *alpha);
      fs::create_directories(*out);
      write_comparisons_csv(std::span<const Comparison>(&c, 1), fs::path(*out) / "comparisons.csv");
      m.add_output(fs::path(*out) / "comparisons.csv");
      m.write(*out);
      fmt::print("{} ({:.4f}) vs {} ({:.4f}): p_{} = {:.6g}, n_effective = {}\n", c.variant_a, c.mean_a,
                 c.variant_b, c.mean_b, to_string(alternative), c.requested.p_value, c.requested.n_effective);
      fmt::print("verdict {}\n", c.verdict);
    };
  });
}

void add_random_control(CLI::App& app, Globals& g, std::function<void()>& action) {
  auto* sub = app.add_subcommand("random-control", "Test random scales against the characteristic scale");
  auto flags = std::make_shared<TrainFlags>();
  auto range = std::make_shared<std::string>("0,1");
  auto samples = std::make_shared<int>(10);
  auto out = std::make_shared<std::string>();
  flags->add(sub);
  sub->add_option("--range", *range, "Sampling interval 'lo,hi' for tau");
  sub->add_option("--samples", *samples, "Random scales drawn from the range")->check(CLI::PositiveNumber);
  sub->add_option("--out", *out, "Output directory")->required();
  sub->callback([&, sub, flags, range, samples, out] {
    action = [&, sub, flags, range, samples, out] {
      const ScaleRange r = parse_range(*range);
      ExperimentConfig c = flags->config(g, Variant::MR);
      sample_scales(r, 1, g.seed);  // validates the range before any work
      RunManifest m(g.command_line, "random-control");
      m.set_config(resolved_config(*sub, g));
      const std::string dir = resolve_dataset(flags->dataset);
      const PreparedData data = prepare_dataset(load_dataset(dir), c.split_seed);
      m.add_dataset(dir);

      const VariantRun reference = run_variant(c, data);
      ordered_json cfg = resolved_config(*sub, g);
      cfg["resolved"] = resolved_run(reference);
      m.set_config(cfg);
      const fs::path ref_dir = fs::path(*out) / "reference";
      write_run(reference, ref_dir);
      record_run_outputs(m, ref_dir);

      const ControlReport report = random_scale_control(c, data, reference, r, *samples, g.seed);
      write_control_report(report, fs::path(*out) / "control_report.json");
      m.add_output(fs::path(*out) / "control_report.json");
      m.write(*out);

      fmt::print("characteristic scale {:.6g}: mean accuracy {:.4f}\n", report.tau_star, report.reference_accuracy);
      for (const auto& s : report.samples) {
        fmt::print("tau {:.6g}: mean accuracy {:.4f}, p = {:.6g}{}\n", s.tau, s.mean_accuracy, s.test.p_value,
                   s.significant ? " (significant)" : "");
      }
      fmt::print("{} of {} random scales beat the characteristic scale at {:.6g}\n", report.n_significant,
                 report.samples.size(), report.threshold);
    };
  });
}

}  // namespace

void add_commands(CLI::App& app, Globals& g, std::function<void()>& action) {
  add_generate_sbm(app, g, action);
  add_analyze(app, g, action);
  add_renormalize(app, g, action);
  add_train(app, g, action);
  add_compare(app, g, action);
  add_random_control(app, g, action);
}

}  // namespace lrg::cli
