#include "lrg/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>
#include <json.hpp>
#include <omp.h>

#include "lrg/errors.hpp"
#include "lrg/rng.hpp"

namespace lrg {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string upper(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string run_label(const ExperimentConfig& config) {
  return upper(to_string(config.encoder)) + "_" + std::string(to_string(config.variant));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path.string());
  return in;
}

template <typename T>
T parse_number(const std::string& text, const std::filesystem::path& file, std::size_t line_no) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_same_v<T, double>) {
      value = std::stod(text, &used);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      value = std::stoull(text, &used);
    } else {
      value = static_cast<T>(std::stoll(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::logic_error&) {
    throw MalformedLine(file.string(), line_no, "expected a number, got '" + text + "'");
  }
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::SB: return "SB";
    case Variant::SR: return "SR";
    case Variant::MB: return "MB";
    case Variant::MR: return "MR";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  const std::string t = upper(text);
  if (t == "SB") return Variant::SB;
  if (t == "SR") return Variant::SR;
  if (t == "MB") return Variant::MB;
  if (t == "MR") return Variant::MR;
  throw InvalidConfig("variant must be one of SB, SR, MB, MR; got '" + std::string(text) + "'");
}

nn::EncoderKind parse_encoder_kind(std::string_view text) {
  const std::string t = lower(text);
  if (t == "gcn") return nn::EncoderKind::Gcn;
  if (t == "gat") return nn::EncoderKind::Gat;
  throw InvalidConfig("encoder must be 'gcn' or 'gat'; got '" + std::string(text) + "'");
}

std::string_view to_string(nn::EncoderKind kind) { return kind == nn::EncoderKind::Gat ? "gat" : "gcn"; }

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  if (count < 1) throw InvalidConfig("seed count must be positive");
  std::vector<std::uint64_t> out;
  for (int k = 0; k < count; ++k) out.push_back(first + static_cast<std::uint64_t>(k));
  return out;
}

// ---------------------------------------------------------------- splits

std::vector<Split> stratified_split(std::span<const int> labels, std::uint64_t seed, double train, double val) {
  if (!(train > 0.0 && val >= 0.0 && train + val < 1.0)) {
    throw InvalidConfig("split fractions must satisfy 0 < train, 0 <= val, train + val < 1");
  }
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));

  std::vector<Split> out(labels.size(), Split::Test);
  for (auto& [label, nodes] : by_class) {
    CounterRng rng(seed, "split", static_cast<std::uint64_t>(label));
    lrg::shuffle(nodes.begin(), nodes.end(), rng);
    const auto count = static_cast<double>(nodes.size());
    const auto n_train = std::min(nodes.size(), static_cast<std::size_t>(std::llround(train * count)));
    const auto n_val = std::min(nodes.size() - n_train, static_cast<std::size_t>(std::llround(val * count)));
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      out[nodes[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
    }
  }
  return out;
}

nn::NodeMasks masks_from_split(std::span<const Split> split) {
  nn::NodeMasks m;
  for (Split s : split) {
    m.train.push_back(s == Split::Train);
    m.val.push_back(s == Split::Val);
    m.test.push_back(s == Split::Test);
  }
  return m;
}

PreparedData prepare_dataset(const Dataset& dataset, std::uint64_t split_seed) {
  Dataset lcc = largest_connected_component(dataset);
  PreparedData out;
  out.masks = lcc.split ? masks_from_split(*lcc.split)
                        : masks_from_split(stratified_split(lcc.graph.labels, split_seed));
  out.graph = std::move(lcc.graph);
  return out;
}

// ---------------------------------------------------------------- inputs

VariantInputs build_variant_inputs(const ExperimentConfig& config, const Graph& g) {
  const bool single = config.variant == Variant::SB || config.variant == Variant::SR;
  const bool renormalized = config.variant == Variant::SR || config.variant == Variant::MR;
  int n_encoders = config.n_encoders;
  if (single) {
    if (n_encoders > 1) throw InvalidConfig(std::string(to_string(config.variant)) + " uses exactly one encoder");
    n_encoders = 1;
  } else if (n_encoders == 0) {
    n_encoders = config.variant == Variant::MR && !config.taus.empty()
                     ? 1 + static_cast<int>(config.taus.size())
                     : 2;
  }
  if (!single && n_encoders < 2) throw InvalidConfig("multi-encoder variants need at least two encoders");

  VariantInputs in;
  if (!renormalized) {
    if (!config.taus.empty()) throw InvalidConfig("base variants take no scales");
    in.slots.assign(static_cast<std::size_t>(n_encoders), g);
    return in;
  }

  const std::size_t wanted = config.variant == Variant::SR ? 1 : static_cast<std::size_t>(n_encoders - 1);
  const LaplacianSpectrum spectrum = eigendecompose(laplacian(g));
  in.taus = config.taus;
  if (in.taus.empty()) {
    const EntropyScan scan = entropy_scan(spectrum, config.tau_min, config.tau_max, config.scan_points);
    const auto peaks = detect_peaks(scan);
    if (peaks.size() < wanted) {
      throw InvalidConfig(fmt::format("{} scales requested but only {} detected", wanted, peaks.size()));
    }
    for (std::size_t k = 0; k < wanted; ++k) in.taus.push_back(peaks[k].tau);
  }
  if (in.taus.size() != wanted) {
    throw InvalidConfig(fmt::format("{} with {} encoders needs {} scales, got {}", to_string(config.variant),
                                    n_encoders, wanted, in.taus.size()));
  }

  if (config.variant == Variant::MR) in.slots.push_back(g);
  for (double tau : in.taus) {
    RenormalizedGraph r = renormalize_at(g, spectrum, tau);
    in.slots.push_back(std::move(r.graph));
    in.partitions.push_back(std::move(r.partition));
  }
  return in;
}

// ---------------------------------------------------------------- scores

std::vector<double> ScoreTable::flattened() const {
  std::vector<double> out;
  out.reserve(columns.size() * node_ids.size());
  for (const auto& col : columns)
    for (auto s : col) out.push_back(static_cast<double>(s));
  return out;
}

double ScoreTable::seed_accuracy(std::size_t s) const {
  const auto& col = columns.at(s);
  if (col.empty()) return 0.0;
  return static_cast<double>(std::count(col.begin(), col.end(), 1)) / static_cast<double>(col.size());
}

double ScoreTable::mean_accuracy() const {
  if (columns.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s < columns.size(); ++s) total += seed_accuracy(s);
  return total / static_cast<double>(columns.size());
}

// ---------------------------------------------------------------- runs

VariantRun run_variant(const ExperimentConfig& config, const PreparedData& data) {
  return run_variant(config, data, build_variant_inputs(config, data.graph));
}

VariantRun run_variant(const ExperimentConfig& config, const PreparedData& data, VariantInputs inputs) {
  VariantRun run;
  run.config = config;
  if (run.config.seeds.empty()) run.config.seeds = seed_range(0);
  run.inputs = std::move(inputs);

  const Graph& g = data.graph;
  const nn::EncoderConfig enc{config.encoder, g.feature_dim(), config.hidden_dim, config.out_dim, config.gat_heads};
  const std::vector<nn::EncoderConfig> encoders(run.inputs.slots.size(), enc);
  const auto& seeds = run.config.seeds;
  run.records.resize(seeds.size());

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    try {
      nn::MultiScaleModel model(encoders, g.n_classes(), seeds[s]);
      run.records[s] = nn::train(model, run.inputs.slots, g.features, g.labels, data.masks, seeds[s], config.train);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  ScoreTable& t = run.scores;
  t.variant = run_label(config);
  t.seeds = seeds;
  for (int i : run.records.front().test_nodes) t.node_ids.push_back(g.node_ids[i]);
  for (const auto& r : run.records) t.columns.push_back(r.test_scores);
  return run;
}

void write_run(const VariantRun& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string label = run.scores.variant;
  {
    auto out = fmt::output_file((dir / "results.csv").string());
    out.print("variant,dataset,seed,test_accuracy,checkpoint_epoch\n");
    for (const auto& r : run.records) {
      out.print("{},{},{},{},{}\n", label, run.config.dataset, r.seed, r.test_accuracy, r.checkpoint_epoch);
    }
  }
  {
    auto out = fmt::output_file((dir / "scores.csv").string());
    out.print("seed,node_id,score\n");
    for (std::size_t s = 0; s < run.scores.seeds.size(); ++s) {
      for (std::size_t k = 0; k < run.scores.node_ids.size(); ++k) {
        out.print("{},{},{}\n", run.scores.seeds[s], run.scores.node_ids[k], run.scores.columns[s][k]);
      }
    }
  }
  {
    auto curves = fmt::output_file((dir / "curves.csv").string());
    auto epochs = fmt::output_file((dir / "epochs.jsonl").string());
    curves.print("seed,epoch,train_loss,train_accuracy,val_accuracy,test_accuracy\n");
    for (const auto& r : run.records) {
      for (const auto& m : r.epochs) {
        curves.print("{},{},{},{},{},{}\n", r.seed, m.epoch, m.train_loss, m.train_accuracy, m.val_accuracy,
                     m.test_accuracy);
        const nlohmann::ordered_json line{{"seed", r.seed},
                                          {"epoch", m.epoch},
                                          {"train_loss", m.train_loss},
                                          {"train_accuracy", m.train_accuracy},
                                          {"val_accuracy", m.val_accuracy},
                                          {"test_accuracy", m.test_accuracy}};
        epochs.print("{}\n", line.dump());
      }
    }
  }
  {
    nlohmann::ordered_json slots = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < run.inputs.slots.size(); ++k) {
      slots.push_back({{"slot", k}, {"n_edges", run.inputs.slots[k].n_edges()}});
    }
    nlohmann::ordered_json partitions = nlohmann::ordered_json::array();
    for (const auto& p : run.inputs.partitions) partitions.push_back({{"tau", p.tau}, {"n_macro", p.n_macro}});
    const nlohmann::ordered_json info{{"variant", label},
                                      {"dataset", run.config.dataset},
                                      {"taus", run.inputs.taus},
                                      {"partitions", partitions},
                                      {"slots", slots},
                                      {"mean_test_accuracy", run.scores.mean_accuracy()}};
    std::ofstream out(dir / "run.json");
    out << info.dump(2) << '\n';
  }
}

ScoreTable read_score_table(const std::filesystem::path& dir) {
  ScoreTable t;
  {
    const auto path = dir / "results.csv";
    auto in = open_input(path);
    std::string line;
    std::getline(in, line);
    if (std::getline(in, line)) {
      const auto cells = split_csv(line);
      if (cells.size() != 5) throw MalformedLine(path.string(), 2, "expected 5 columns");
      t.variant = cells[0];
    }
  }
  const auto path = dir / "scores.csv";
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 1;
  std::getline(in, line);
  std::vector<std::int64_t> current_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw MalformedLine(path.string(), line_no, "expected seed,node_id,score");
    const auto seed = parse_number<std::uint64_t>(cells[0], path, line_no);
    const auto node = parse_number<std::int64_t>(cells[1], path, line_no);
    const auto score = parse_number<int>(cells[2], path, line_no);
    if (score != 0 && score != 1) throw MalformedLine(path.string(), line_no, "score must be 0 or 1");
    if (t.seeds.empty() || t.seeds.back() != seed) {
      if (!t.seeds.empty() && current_ids != t.node_ids) {
        throw MalformedLine(path.string(), line_no, "seeds cover different test nodes");
      }
      if (std::find(t.seeds.begin(), t.seeds.end(), seed) != t.seeds.end()) {
        throw MalformedLine(path.string(), line_no, "seed rows are not contiguous");
      }
      t.seeds.push_back(seed);
      t.columns.emplace_back();
      current_ids.clear();
    }
    if (t.seeds.size() == 1) t.node_ids.push_back(node);
    current_ids.push_back(node);
    t.columns.back().push_back(static_cast<std::uint8_t>(score));
  }
  if (!t.seeds.empty() && current_ids != t.node_ids) {
    throw MalformedLine(path.string(), line_no, "seeds cover different test nodes");
  }
  return t;
}

// ---------------------------------------------------------------- comparison

void require_aligned(const ScoreTable& a, const ScoreTable& b) {
  if (a.seeds != b.seeds) throw MisalignedTables("score tables were produced with different seed lists");
  if (a.node_ids != b.node_ids) throw MisalignedTables("score tables cover different test nodes");
  if (a.columns.size() != a.seeds.size() || b.columns.size() != b.seeds.size()) {
    throw MisalignedTables("score table has a column count different from its seed count");
  }
}

Comparison compare(const ScoreTable& a, const ScoreTable& b, Alternative alt, double alpha) {
  require_aligned(a, b);
  const auto fa = a.flattened();
  const auto fb = b.flattened();
  const WilcoxonResult greater = wilcoxon_signed_rank(fa, fb, Alternative::Greater);
  const WilcoxonResult less = wilcoxon_signed_rank(fa, fb, Alternative::Less);

  Comparison c;
  c.variant_a = a.variant;
  c.variant_b = b.variant;
  c.alternative = alt;
  c.requested = alt == Alternative::Greater ? greater : less;
  c.p_greater = greater.p_value;
  c.p_less = less.p_value;
  c.verdict = greater.p_value < alpha ? '+' : (less.p_value < alpha ? '-' : '=');
  c.mean_a = a.mean_accuracy();
  c.mean_b = b.mean_accuracy();
  return c;
}

void write_comparisons_csv(std::span<const Comparison> rows, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("variant_a,variant_b,alternative,p_value,verdict\n");
  for (const auto& c : rows) {
    out.print("{},{},{},{},{}\n", c.variant_a, c.variant_b, to_string(c.alternative), c.requested.p_value,
              c.verdict);
  }
}

// ---------------------------------------------------------------- random scales

std::vector<double> sample_scales(ScaleRange range, int n, std::uint64_t seed) {
  if (!(range.lo >= 0.0 && range.hi > range.lo && range.hi > kRandomScaleFloor)) {
    throw InvalidRange(fmt::format("scale range [{}, {}) must satisfy 0 <= lo < hi and hi > {}", range.lo,
                                   range.hi, kRandomScaleFloor));
  }
  if (n < 1) throw InvalidConfig("sample count must be positive");
  CounterRng rng(seed, "sampler", std::bit_cast<std::uint64_t>(range.hi));
  std::vector<double> out;
  while (static_cast<int>(out.size()) < n) {
    const double tau = rng.uniform(range.lo, range.hi);
    if (tau > kRandomScaleFloor) out.push_back(tau);
  }
  return out;
}

double control_threshold(int n_samples, double alpha) { return alpha / (3.0 * n_samples); }

ControlReport random_scale_control(const ExperimentConfig& config, const PreparedData& data,
                                   const VariantRun& reference, ScaleRange range, int n_samples,
                                   std::uint64_t sampler_seed) {
  if (reference.config.variant != Variant::MR || reference.inputs.taus.size() != 1) {
    throw InvalidConfig("random-scale control needs an MR reference run at a single scale");
  }
  ControlReport report;
  report.range = range;
  report.tau_star = reference.inputs.taus.front();
  report.reference_accuracy = reference.scores.mean_accuracy();
  report.threshold = control_threshold(n_samples);

  const Graph& g = data.graph;
  const LaplacianSpectrum spectrum = eigendecompose(laplacian(g));
  ExperimentConfig cfg = config;
  cfg.variant = Variant::MR;
  cfg.seeds = reference.config.seeds;

  for (double tau : sample_scales(range, n_samples, sampler_seed)) {
    VariantInputs in;
    in.slots.push_back(g);
    RenormalizedGraph r = renormalize_at(g, spectrum, tau);
    in.slots.push_back(std::move(r.graph));
    in.partitions.push_back(std::move(r.partition));
    in.taus = {tau};
    cfg.taus = {tau};
    const VariantRun run = run_variant(cfg, data, std::move(in));
    require_aligned(run.scores, reference.scores);

    ControlSample s;
    s.tau = tau;
    s.mean_accuracy = run.scores.mean_accuracy();
    s.test = wilcoxon_signed_rank(run.scores.flattened(), reference.scores.flattened(), Alternative::Greater);
    s.significant = s.test.p_value < report.threshold;
    report.n_significant += s.significant;
    report.samples.push_back(s);
  }

  for (std::size_t k = 1; k < report.samples.size(); ++k) {
    if (report.samples[k].mean_accuracy > report.samples[report.best].mean_accuracy) report.best = k;
    if (report.samples[k].mean_accuracy < report.samples[report.worst].mean_accuracy) report.worst = k;
  }
  return report;
}

void write_control_report(const ControlReport& report, const std::filesystem::path& path) {
  using nlohmann::ordered_json;
  ordered_json samples = ordered_json::array();
  std::vector<double> p_values;
  for (const auto& s : report.samples) {
    samples.push_back({{"tau", s.tau},
                       {"mean_accuracy", s.mean_accuracy},
                       {"statistic", s.test.statistic},
                       {"p_value", s.test.p_value},
                       {"n_effective", s.test.n_effective},
                       {"significant", s.significant}});
    p_values.push_back(s.test.p_value);
  }
  auto scale = [&](std::size_t k) {
    const auto& s = report.samples.at(k);
    return ordered_json{{"tau", s.tau}, {"mean_accuracy", s.mean_accuracy}, {"p_value", s.test.p_value}};
  };
  const ordered_json doc{{"range", {report.range.lo, report.range.hi}},
                         {"tau_star", report.tau_star},
                         {"reference_accuracy", report.reference_accuracy},
                         {"alternative", "greater"},
                         {"bonferroni_threshold", report.threshold},
                         {"n_samples", report.samples.size()},
                         {"n_significant", report.n_significant},
                         {"p_values", p_values},
                         {"best", report.samples.empty() ? ordered_json() : scale(report.best)},
                         {"worst", report.samples.empty() ? ordered_json() : scale(report.worst)},
                         {"samples", samples}};
  std::ofstream out(path);
  if (!out) throw MissingFile(path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace lrg
