#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "lrg/graph.hpp"
#include "lrg/rng.hpp"

namespace lrg::nn {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class EncoderKind { Gcn, Gat };

/// Two-layer graph encoder: in_dim -> hidden_dim -> out_dim.
/// GCN: ReLU between layers. GAT: LeakyReLU(0.2) attention scores, ELU
/// between layers, heads concatenated after layer 1 and averaged after layer 2.
struct EncoderConfig {
  EncoderKind kind = EncoderKind::Gcn;
  int in_dim = 1;
  int hidden_dim = 64;
  int out_dim = 64;
  int gat_heads = 1;
};

inline constexpr double kGatNegativeSlope = 0.2;

struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
};

/// Message-passing structure of one graph: CSR neighbour lists including the
/// self loop, plus the symmetric-normalized GCN operator D^-1/2 (A + I) D^-1/2.
struct GraphOperator {
  int n_nodes = 0;
  std::vector<int> offsets;    // n_nodes + 1
  std::vector<int> neighbors;  // sorted per row, self included
  SparseRows gcn;

  std::size_t n_entries() const { return neighbors.size(); }
};

GraphOperator make_operator(const Graph& g);

/// Keeps only edges whose endpoints both have keep[i] set; every node retains
/// its self loop.
GraphOperator make_operator(const Graph& g, std::span<const std::uint8_t> keep);

SparseRows to_sparse(const Eigen::MatrixXd& dense);

class Encoder {
 public:
  virtual ~Encoder() = default;

  /// Output embeddings [n x out_dim]. Caches what backward() needs; the
  /// operator and features must outlive the matching backward() call.
  virtual Eigen::MatrixXd forward(const GraphOperator& op, const SparseRows& x) = 0;

  /// Accumulates parameter gradients given dLoss/dOutput.
  virtual void backward(const Eigen::MatrixXd& grad_out) = 0;

  virtual std::vector<Parameter*> parameters() = 0;
  virtual const EncoderConfig& config() const = 0;
};

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, CounterRng& rng);

/// Glorot/Xavier uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Eigen::MatrixXd glorot_uniform(int rows, int cols, CounterRng& rng);

class GcnEncoder final : public Encoder {
 public:
  GcnEncoder(const EncoderConfig& config, CounterRng& rng);

  Eigen::MatrixXd forward(const GraphOperator& op, const SparseRows& x) override;
  void backward(const Eigen::MatrixXd& grad_out) override;
  std::vector<Parameter*> parameters() override;
  const EncoderConfig& config() const override { return config_; }

  Parameter w1, b1, w2, b2;

 private:
  EncoderConfig config_;
  const GraphOperator* op_ = nullptr;
  const SparseRows* x_ = nullptr;
  Eigen::MatrixXd pre1_;  // A (X W1) + b1
  Eigen::MatrixXd h1_;    // ReLU(pre1_)
};

class GatEncoder final : public Encoder {
 public:
  GatEncoder(const EncoderConfig& config, CounterRng& rng);

  Eigen::MatrixXd forward(const GraphOperator& op, const SparseRows& x) override;
  void backward(const Eigen::MatrixXd& grad_out) override;
  std::vector<Parameter*> parameters() override;
  const EncoderConfig& config() const override { return config_; }

  /// Attention coefficients of the last forward pass, in CSR order of the
  /// operator, for `layer` in {0, 1} and `head`.
  const std::vector<double>& attention(int layer, int head) const;

  // Layer l: w [in x heads*F], att_src / att_dst [heads x F], bias [1 x width].
  Parameter w1, att_src1, att_dst1, b1;
  Parameter w2, att_src2, att_dst2, b2;

  struct LayerCache {
    Eigen::MatrixXd projected;               // X W, n x heads*F
    std::vector<std::vector<double>> score;  // pre-activation logits per head
    std::vector<std::vector<double>> alpha;  // softmax per head
  };

 private:
  EncoderConfig config_;
  const GraphOperator* op_ = nullptr;
  const SparseRows* x_ = nullptr;
  LayerCache layer1_, layer2_;
  Eigen::MatrixXd pre1_;  // concat heads + b1
  Eigen::MatrixXd h1_;    // ELU(pre1_)
};

/// Parallel encoders whose outputs are concatenated and fed to one linear
/// classifier. Encoder k reads graph slot k.
class MultiScaleModel {
 public:
  MultiScaleModel(std::vector<EncoderConfig> encoders, int n_classes, std::uint64_t seed);

  MultiScaleModel(const MultiScaleModel&) = delete;
  MultiScaleModel& operator=(const MultiScaleModel&) = delete;
  MultiScaleModel(MultiScaleModel&&) = default;
  MultiScaleModel& operator=(MultiScaleModel&&) = default;

  /// Class logits [n x n_classes].
  Eigen::MatrixXd forward(std::span<const GraphOperator* const> graphs, const SparseRows& x);
  Eigen::MatrixXd forward(std::span<const Graph> graphs, const Eigen::MatrixXd& features);

  void backward(const Eigen::MatrixXd& grad_logits);
  void zero_grad();

  std::vector<Parameter*> parameters();
  std::size_t n_encoders() const { return encoders_.size(); }
  Encoder& encoder(std::size_t k) { return *encoders_[k]; }
  int n_classes() const { return n_classes_; }

  /// Flat copy of every parameter value, in parameters() order.
  std::vector<Eigen::MatrixXd> snapshot();
  void restore(const std::vector<Eigen::MatrixXd>& values);

  Parameter classifier_w, classifier_b;

 private:
  std::vector<std::unique_ptr<Encoder>> encoders_;
  int n_classes_;
  std::vector<Eigen::Index> widths_;
  Eigen::MatrixXd concat_;
  std::vector<GraphOperator> owned_ops_;  // backing for the Graph overload of forward()
  SparseRows owned_x_;
};

/// Mean softmax cross-entropy over the rows where mask is set. Writes
/// dLoss/dLogits (zero on unmasked rows) into `grad` when non-null.
double cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                     std::span<const std::uint8_t> mask, Eigen::MatrixXd* grad);

std::vector<int> predict(const Eigen::MatrixXd& logits);

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : opt_(options) {}
  void step(std::span<Parameter* const> params);
  long long steps() const { return t_; }

 private:
  AdamOptions opt_;
  long long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

struct NodeMasks {
  std::vector<std::uint8_t> train, val, test;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct TrainOptions {
  int epochs = 1000;
  AdamOptions adam;
};

struct TrainRecord {
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  int checkpoint_epoch = 0;  // 1-based; maximizes val accuracy, first on ties
  double checkpoint_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<int> test_nodes;            // ascending node indices
  std::vector<std::uint8_t> test_scores;  // 1 if predicted == label
};

/// Full-batch training. Each epoch runs forward/backward on the train-only
/// subgraphs, takes an Adam step, then evaluates on the full graphs. The model
/// ends holding the checkpointed parameters.
TrainRecord train(MultiScaleModel& model, std::span<const Graph> graphs, const Eigen::MatrixXd& features,
                  std::span<const int> labels, const NodeMasks& masks, std::uint64_t seed,
                  const TrainOptions& options = {});

/// Max relative error between analytic and central-difference gradients of
/// the masked cross-entropy, over every parameter entry. Entries where both
/// magnitudes are below 1e-6 are compared with that floor as denominator.
double gradient_check(MultiScaleModel& model, std::span<const Graph> graphs, const Eigen::MatrixXd& features,
                      std::span<const int> labels, std::span<const std::uint8_t> mask, double step = 1e-5);

}  // namespace lrg::nn
