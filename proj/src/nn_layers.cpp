#include <algorithm>
#include <cmath>
#include <string>

#include "lrg/errors.hpp"
#include "lrg/nn.hpp"

namespace lrg::nn {

namespace {

GraphOperator build_operator(const Graph& g, const std::uint8_t* keep) {
  const int n = g.n_nodes;
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rows[i].push_back(i);
  for (const auto& [u, v] : g.edges) {
    if (keep && !(keep[u] && keep[v])) continue;
    rows[u].push_back(v);
    rows[v].push_back(u);
  }

  GraphOperator op;
  op.n_nodes = n;
  op.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    op.offsets[i + 1] = op.offsets[i] + static_cast<int>(rows[i].size());
  }
  op.neighbors.reserve(static_cast<std::size_t>(op.offsets[n]));
  for (const auto& r : rows) op.neighbors.insert(op.neighbors.end(), r.begin(), r.end());

  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(rows[i].size()));

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(op.neighbors.size());
  for (int i = 0; i < n; ++i) {
    for (int e = op.offsets[i]; e < op.offsets[i + 1]; ++e) {
      const int j = op.neighbors[e];
      triplets.emplace_back(i, j, inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
  }
  op.gcn.resize(n, n);
  op.gcn.setFromTriplets(triplets.begin(), triplets.end());
  op.gcn.makeCompressed();
  return op;
}

Parameter make_param(std::string name, Eigen::MatrixXd value) {
  Parameter p{std::move(name), std::move(value), {}};
  p.grad = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
  return p;
}

void check_input(const EncoderConfig& config, const GraphOperator& op, const SparseRows& x) {
  if (x.cols() != config.in_dim) {
    throw DimMismatch("encoder expects " + std::to_string(config.in_dim) + " input features, got " +
                      std::to_string(x.cols()));
  }
  if (x.rows() != op.n_nodes) {
    throw DimMismatch("feature rows (" + std::to_string(x.rows()) + ") differ from graph nodes (" +
                      std::to_string(op.n_nodes) + ")");
  }
}

void check_config(const EncoderConfig& c) {
  if (c.in_dim < 1 || c.hidden_dim < 1 || c.out_dim < 1 || c.gat_heads < 1) {
    throw InvalidConfig("encoder dimensions and head count must be positive");
  }
}

Eigen::RowVectorXd column_sums(const Eigen::MatrixXd& m) { return m.colwise().sum(); }

// Additive attention over each row's neighbourhood (self included), all heads.
// `projected` holds head k in columns [k*F, (k+1)*F).
Eigen::MatrixXd attend(const GraphOperator& op, const Eigen::MatrixXd& projected, int heads,
                       const Parameter& att_src, const Parameter& att_dst, GatEncoder::LayerCache& cache) {
  const int n = op.n_nodes;
  const Eigen::Index f = projected.cols() / heads;
  const std::size_t n_entries = op.n_entries();
  cache.score.assign(static_cast<std::size_t>(heads), std::vector<double>(n_entries));
  cache.alpha.assign(static_cast<std::size_t>(heads), std::vector<double>(n_entries));

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, projected.cols());
  for (int k = 0; k < heads; ++k) {
    const auto pk = projected.middleCols(k * f, f);
    const Eigen::VectorXd s_src = pk * att_src.value.row(k).transpose();
    const Eigen::VectorXd s_dst = pk * att_dst.value.row(k).transpose();
    auto& score = cache.score[k];
    auto& alpha = cache.alpha[k];
    for (int i = 0; i < n; ++i) {
      const int begin = op.offsets[i];
      const int end = op.offsets[i + 1];
      double row_max = -INFINITY;
      for (int e = begin; e < end; ++e) {
        const double z = s_dst[i] + s_src[op.neighbors[e]];
        score[e] = z;
        const double act = z > 0.0 ? z : kGatNegativeSlope * z;
        alpha[e] = act;
        row_max = std::max(row_max, act);
      }
      double total = 0.0;
      for (int e = begin; e < end; ++e) {
        alpha[e] = std::exp(alpha[e] - row_max);
        total += alpha[e];
      }
      for (int e = begin; e < end; ++e) {
        alpha[e] /= total;
        out.row(i).segment(k * f, f).noalias() += alpha[e] * pk.row(op.neighbors[e]);
      }
    }
  }
  return out;
}

// Gradient w.r.t. `projected`; accumulates attention-vector gradients.
Eigen::MatrixXd attend_backward(const GraphOperator& op, const Eigen::MatrixXd& grad_out, int heads,
                                Parameter& att_src, Parameter& att_dst, const GatEncoder::LayerCache& cache) {
  const int n = op.n_nodes;
  const Eigen::MatrixXd& projected = cache.projected;
  const Eigen::Index f = projected.cols() / heads;
  Eigen::MatrixXd grad_projected = Eigen::MatrixXd::Zero(n, projected.cols());

  std::vector<double> d_alpha;
  for (int k = 0; k < heads; ++k) {
    const auto pk = projected.middleCols(k * f, f);
    const auto gk = grad_out.middleCols(k * f, f);
    auto dpk = grad_projected.middleCols(k * f, f);
    const auto& score = cache.score[k];
    const auto& alpha = cache.alpha[k];
    Eigen::VectorXd ds_src = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ds_dst = Eigen::VectorXd::Zero(n);

    for (int i = 0; i < n; ++i) {
      const int begin = op.offsets[i];
      const int end = op.offsets[i + 1];
      d_alpha.resize(static_cast<std::size_t>(end - begin));
      double weighted = 0.0;
      for (int e = begin; e < end; ++e) {
        const int j = op.neighbors[e];
        const double da = gk.row(i).dot(pk.row(j));
        d_alpha[e - begin] = da;
        weighted += alpha[e] * da;
        dpk.row(j).noalias() += alpha[e] * gk.row(i);
      }
      for (int e = begin; e < end; ++e) {
        const double d_act = alpha[e] * (d_alpha[e - begin] - weighted);
        const double dz = score[e] > 0.0 ? d_act : kGatNegativeSlope * d_act;
        ds_dst[i] += dz;
        ds_src[op.neighbors[e]] += dz;
      }
    }
    dpk.noalias() += ds_src * att_src.value.row(k);
    dpk.noalias() += ds_dst * att_dst.value.row(k);
    att_src.grad.row(k).noalias() += (pk.transpose() * ds_src).transpose();
    att_dst.grad.row(k).noalias() += (pk.transpose() * ds_dst).transpose();
  }
  return grad_projected;
}

}  // namespace

GraphOperator make_operator(const Graph& g) { return build_operator(g, nullptr); }

GraphOperator make_operator(const Graph& g, std::span<const std::uint8_t> keep) {
  if (keep.size() != static_cast<std::size_t>(g.n_nodes)) {
    throw DimMismatch("node mask length " + std::to_string(keep.size()) + " differs from graph nodes " +
                      std::to_string(g.n_nodes));
  }
  return build_operator(g, keep.data());
}

SparseRows to_sparse(const Eigen::MatrixXd& dense) {
  SparseRows s = dense.sparseView(0.0, 0.0);
  s.makeCompressed();
  return s;
}

Eigen::MatrixXd glorot_uniform(int rows, int cols, CounterRng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd w(rows, cols);
  // Row-major fill so the draw order does not depend on Eigen's storage order.
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-a, a);
  return w;
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, CounterRng& rng) {
  if (config.kind == EncoderKind::Gat) return std::make_unique<GatEncoder>(config, rng);
  return std::make_unique<GcnEncoder>(config, rng);
}

// ---------------------------------------------------------------- GCN

GcnEncoder::GcnEncoder(const EncoderConfig& config, CounterRng& rng) : config_(config) {
  check_config(config);
  w1 = make_param("gcn.w1", glorot_uniform(config.in_dim, config.hidden_dim, rng));
  b1 = make_param("gcn.b1", Eigen::MatrixXd::Zero(1, config.hidden_dim));
  w2 = make_param("gcn.w2", glorot_uniform(config.hidden_dim, config.out_dim, rng));
  b2 = make_param("gcn.b2", Eigen::MatrixXd::Zero(1, config.out_dim));
}

Eigen::MatrixXd GcnEncoder::forward(const GraphOperator& op, const SparseRows& x) {
  check_input(config_, op, x);
  op_ = &op;
  x_ = &x;
  const Eigen::MatrixXd xw = x * w1.value;
  pre1_ = op.gcn * xw;
  pre1_.rowwise() += b1.value.row(0);
  h1_ = pre1_.cwiseMax(0.0);
  const Eigen::MatrixXd hw = h1_ * w2.value;
  Eigen::MatrixXd out = op.gcn * hw;
  out.rowwise() += b2.value.row(0);
  return out;
}

void GcnEncoder::backward(const Eigen::MatrixXd& grad_out) {
  // The normalized operator is symmetric, so it is its own transpose.
  const SparseRows& a = op_->gcn;
  b2.grad.row(0) += column_sums(grad_out);
  const Eigen::MatrixXd a_g2 = a * grad_out;
  w2.grad.noalias() += h1_.transpose() * a_g2;
  Eigen::MatrixXd g1 = a_g2 * w2.value.transpose();
  g1 = (pre1_.array() > 0.0).select(g1, 0.0);
  b1.grad.row(0) += column_sums(g1);
  const Eigen::MatrixXd a_g1 = a * g1;
  w1.grad.noalias() += x_->transpose() * a_g1;
}

std::vector<Parameter*> GcnEncoder::parameters() { return {&w1, &b1, &w2, &b2}; }

// ---------------------------------------------------------------- GAT

GatEncoder::GatEncoder(const EncoderConfig& config, CounterRng& rng) : config_(config) {
  check_config(config);
  const int h = config.gat_heads;
  const int width1 = h * config.hidden_dim;
  w1 = make_param("gat.w1", glorot_uniform(config.in_dim, width1, rng));
  att_src1 = make_param("gat.att_src1", glorot_uniform(h, config.hidden_dim, rng));
  att_dst1 = make_param("gat.att_dst1", glorot_uniform(h, config.hidden_dim, rng));
  b1 = make_param("gat.b1", Eigen::MatrixXd::Zero(1, width1));
  w2 = make_param("gat.w2", glorot_uniform(width1, h * config.out_dim, rng));
  att_src2 = make_param("gat.att_src2", glorot_uniform(h, config.out_dim, rng));
  att_dst2 = make_param("gat.att_dst2", glorot_uniform(h, config.out_dim, rng));
  b2 = make_param("gat.b2", Eigen::MatrixXd::Zero(1, config.out_dim));
}

Eigen::MatrixXd GatEncoder::forward(const GraphOperator& op, const SparseRows& x) {
  check_input(config_, op, x);
  op_ = &op;
  x_ = &x;
  const int h = config_.gat_heads;

  layer1_.projected = x * w1.value;
  pre1_ = attend(op, layer1_.projected, h, att_src1, att_dst1, layer1_);
  pre1_.rowwise() += b1.value.row(0);
  h1_ = pre1_.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });

  layer2_.projected = h1_ * w2.value;
  const Eigen::MatrixXd heads_out = attend(op, layer2_.projected, h, att_src2, att_dst2, layer2_);
  const int f = config_.out_dim;
  Eigen::MatrixXd out = heads_out.leftCols(f);
  for (int k = 1; k < h; ++k) out += heads_out.middleCols(k * f, f);
  out /= static_cast<double>(h);
  out.rowwise() += b2.value.row(0);
  return out;
}

void GatEncoder::backward(const Eigen::MatrixXd& grad_out) {
  const int h = config_.gat_heads;
  const int f = config_.out_dim;
  b2.grad.row(0) += column_sums(grad_out);
  Eigen::MatrixXd g_heads(grad_out.rows(), static_cast<Eigen::Index>(h) * f);
  for (int k = 0; k < h; ++k) g_heads.middleCols(k * f, f) = grad_out / static_cast<double>(h);

  const Eigen::MatrixXd dp2 = attend_backward(*op_, g_heads, h, att_src2, att_dst2, layer2_);
  w2.grad.noalias() += h1_.transpose() * dp2;
  Eigen::MatrixXd g1 = dp2 * w2.value.transpose();
  g1.array() *= pre1_.array().unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
  b1.grad.row(0) += column_sums(g1);

  const Eigen::MatrixXd dp1 = attend_backward(*op_, g1, h, att_src1, att_dst1, layer1_);
  w1.grad.noalias() += x_->transpose() * dp1;
}

std::vector<Parameter*> GatEncoder::parameters() {
  return {&w1, &att_src1, &att_dst1, &b1, &w2, &att_src2, &att_dst2, &b2};
}

const std::vector<double>& GatEncoder::attention(int layer, int head) const {
  const LayerCache& c = layer == 0 ? layer1_ : layer2_;
  return c.alpha.at(static_cast<std::size_t>(head));
}

}  // namespace lrg::nn
