#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrg/graph.hpp"
#include "lrg/nn.hpp"
#include "lrg/renorm.hpp"
#include "lrg/spectral.hpp"
#include "lrg/wilcoxon.hpp"

namespace lrg {

/// Single/multi encoder x base/renormalized inputs.
enum class Variant { SB, SR, MB, MR };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);
nn::EncoderKind parse_encoder_kind(std::string_view text);  // "gcn" | "gat"
std::string_view to_string(nn::EncoderKind kind);

inline constexpr int kDefaultSeedCount = 10;
inline constexpr double kSignificance = 0.05;

struct ExperimentConfig {
  std::string dataset = "dataset";  // label written into results
  nn::EncoderKind encoder = nn::EncoderKind::Gcn;
  Variant variant = Variant::SB;
  int n_encoders = 0;         // 0 = 1 for S*, 2 for MB, 1 + |taus| for MR
  std::vector<double> taus;   // empty = top detected scale (R variants)
  std::vector<std::uint64_t> seeds;
  std::uint64_t split_seed = 0;
  int hidden_dim = 64;
  int out_dim = 64;
  int gat_heads = 1;
  nn::TrainOptions train;
  double tau_min = kDefaultTauMin;
  double tau_max = kDefaultTauMax;
  int scan_points = kDefaultScanPoints;
};

/// Seeds first, first + 1, ..., first + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t first, int count = kDefaultSeedCount);

/// Per class: shuffle (stream "split"), then round(train * c) train nodes,
/// round(val * c) val nodes, the rest test.
std::vector<Split> stratified_split(std::span<const int> labels, std::uint64_t seed, double train = 0.6,
                                    double val = 0.2);

nn::NodeMasks masks_from_split(std::span<const Split> split);

/// Largest connected component plus its node split: the dataset's masks when
/// present, otherwise a stratified split.
struct PreparedData {
  Graph graph;
  nn::NodeMasks masks;
};

PreparedData prepare_dataset(const Dataset& dataset, std::uint64_t split_seed);

/// Graph slots fed to the encoders. Base variants repeat the original graph;
/// SR uses the renormalized graph alone; MR keeps the original in slot 0 and
/// one renormalized graph per scale after it.
struct VariantInputs {
  std::vector<Graph> slots;
  std::vector<double> taus;
  std::vector<MacroNodePartition> partitions;
};

/// Resolves the encoder count and, for R variants, the scales (auto = top
/// detected peak). Throws InvalidConfig on inconsistent settings.
VariantInputs build_variant_inputs(const ExperimentConfig& config, const Graph& g);

/// Per-node binary test scores. columns[s][k] is the score of node_ids[k]
/// under seeds[s].
struct ScoreTable {
  std::string variant;
  std::vector<std::int64_t> node_ids;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<std::uint8_t>> columns;

  /// Seed-major flattening, (node, seed) pairs as one sample.
  std::vector<double> flattened() const;
  double mean_accuracy() const;
  double seed_accuracy(std::size_t s) const;
};

struct VariantRun {
  ExperimentConfig config;
  VariantInputs inputs;
  std::vector<nn::TrainRecord> records;  // one per seed, config.seeds order
  ScoreTable scores;
};

/// Trains one model per seed. Seeds run concurrently; results do not depend
/// on the thread count.
VariantRun run_variant(const ExperimentConfig& config, const PreparedData& data);

/// Same, with caller-supplied slots (used when the scales are already
/// resolved, e.g. by the random-scale control).
VariantRun run_variant(const ExperimentConfig& config, const PreparedData& data, VariantInputs inputs);

/// results.csv, scores.csv, curves.csv and epochs.jsonl under `dir`.
void write_run(const VariantRun& run, const std::filesystem::path& dir);

/// Reads a ScoreTable back from a run directory written by write_run.
ScoreTable read_score_table(const std::filesystem::path& dir);

struct Comparison {
  std::string variant_a;
  std::string variant_b;
  Alternative alternative = Alternative::Greater;
  WilcoxonResult requested;  // test in the requested direction
  double p_greater = 1.0;    // one-sided p(a > b)
  double p_less = 1.0;       // one-sided p(a < b)
  char verdict = '=';        // '+', '-' or '='
  double mean_a = 0.0;
  double mean_b = 0.0;
};

/// Throws MisalignedTables unless seeds and node ids match exactly.
void require_aligned(const ScoreTable& a, const ScoreTable& b);

Comparison compare(const ScoreTable& a, const ScoreTable& b, Alternative alt = Alternative::Greater,
                   double alpha = kSignificance);

/// variant_a,variant_b,alternative,p_value,verdict
void write_comparisons_csv(std::span<const Comparison> rows, const std::filesystem::path& path);

struct ScaleRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Smallest admissible random scale; draws at or below it are resampled.
inline constexpr double kRandomScaleFloor = kDefaultTauMin;

/// n uniform draws from [lo, hi) with draws <= kRandomScaleFloor rejected.
/// Stream "sampler", indexed by the range so ranges draw independently.
std::vector<double> sample_scales(ScaleRange range, int n, std::uint64_t seed);

struct ControlSample {
  double tau = 0.0;
  double mean_accuracy = 0.0;
  WilcoxonResult test;  // random beats characteristic
  bool significant = false;
};

struct ControlReport {
  ScaleRange range;
  double tau_star = 0.0;
  double reference_accuracy = 0.0;
  double threshold = 0.0;  // alpha / (3 * n_samples)
  std::vector<ControlSample> samples;
  int n_significant = 0;
  std::size_t best = 0;   // index into samples, highest mean accuracy
  std::size_t worst = 0;  // lowest mean accuracy
};

/// Bonferroni level for three ranges of n_samples draws each.
double control_threshold(int n_samples, double alpha = kSignificance);

/// Runs MR at each sampled scale and tests it against `reference` (MR at the
/// characteristic scale, same seeds) with alternative "greater".
ControlReport random_scale_control(const ExperimentConfig& config, const PreparedData& data,
                                   const VariantRun& reference, ScaleRange range, int n_samples,
                                   std::uint64_t sampler_seed);

void write_control_report(const ControlReport& report, const std::filesystem::path& path);

}  // namespace lrg
