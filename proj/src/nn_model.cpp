#include <algorithm>
#include <cmath>
#include <string>

#include "lrg/errors.hpp"
#include "lrg/nn.hpp"

namespace lrg::nn {

namespace {

double masked_accuracy(std::span<const int> predicted, std::span<const int> labels,
                       std::span<const std::uint8_t> mask) {
  long hits = 0;
  long total = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    hits += predicted[i] == labels[i];
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

void require_nonempty(std::span<const std::uint8_t> mask, const char* which) {
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) throw EmptyMask(which);
}

void check_mask_length(std::span<const std::uint8_t> mask, std::size_t n, const char* which) {
  if (mask.size() != n) {
    throw DimMismatch(std::string(which) + " mask has " + std::to_string(mask.size()) + " entries for " +
                      std::to_string(n) + " nodes");
  }
}

}  // namespace

// ---------------------------------------------------------------- model

MultiScaleModel::MultiScaleModel(std::vector<EncoderConfig> encoders, int n_classes, std::uint64_t seed)
    : n_classes_(n_classes) {
  if (encoders.empty()) throw InvalidConfig("model needs at least one encoder");
  if (n_classes < 1) throw InvalidConfig("model needs at least one class");
  CounterRng rng(seed, "init");
  Eigen::Index width = 0;
  for (const auto& config : encoders) {
    encoders_.push_back(make_encoder(config, rng));
    widths_.push_back(config.out_dim);
    width += config.out_dim;
  }
  classifier_w = Parameter{"classifier.w", glorot_uniform(static_cast<int>(width), n_classes, rng), {}};
  classifier_w.grad = Eigen::MatrixXd::Zero(width, n_classes);
  classifier_b = Parameter{"classifier.b", Eigen::MatrixXd::Zero(1, n_classes), Eigen::MatrixXd::Zero(1, n_classes)};
}

Eigen::MatrixXd MultiScaleModel::forward(std::span<const GraphOperator* const> graphs, const SparseRows& x) {
  if (graphs.size() != encoders_.size()) throw SlotCountMismatch(graphs.size(), encoders_.size());
  Eigen::Index width = 0;
  for (auto w : widths_) width += w;
  concat_.resize(x.rows(), width);
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < encoders_.size(); ++k) {
    concat_.middleCols(col, widths_[k]) = encoders_[k]->forward(*graphs[k], x);
    col += widths_[k];
  }
  Eigen::MatrixXd logits = concat_ * classifier_w.value;
  logits.rowwise() += classifier_b.value.row(0);
  return logits;
}

Eigen::MatrixXd MultiScaleModel::forward(std::span<const Graph> graphs, const Eigen::MatrixXd& features) {
  owned_ops_.clear();
  owned_ops_.reserve(graphs.size());
  for (const auto& g : graphs) owned_ops_.push_back(make_operator(g));
  owned_x_ = to_sparse(features);
  std::vector<const GraphOperator*> slots;
  for (const auto& op : owned_ops_) slots.push_back(&op);
  return forward(slots, owned_x_);
}

void MultiScaleModel::backward(const Eigen::MatrixXd& grad_logits) {
  classifier_b.grad.row(0) += grad_logits.colwise().sum();
  classifier_w.grad.noalias() += concat_.transpose() * grad_logits;
  const Eigen::MatrixXd grad_concat = grad_logits * classifier_w.value.transpose();
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < encoders_.size(); ++k) {
    encoders_[k]->backward(grad_concat.middleCols(col, widths_[k]));
    col += widths_[k];
  }
}

void MultiScaleModel::zero_grad() {
  for (Parameter* p : parameters()) p->grad.setZero();
}

std::vector<Parameter*> MultiScaleModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& enc : encoders_) {
    auto ps = enc->parameters();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  out.push_back(&classifier_w);
  out.push_back(&classifier_b);
  return out;
}

std::vector<Eigen::MatrixXd> MultiScaleModel::snapshot() {
  std::vector<Eigen::MatrixXd> values;
  for (Parameter* p : parameters()) values.push_back(p->value);
  return values;
}

void MultiScaleModel::restore(const std::vector<Eigen::MatrixXd>& values) {
  auto params = parameters();
  if (values.size() != params.size()) throw DimMismatch("snapshot does not match model parameters");
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = values[k];
}

// ---------------------------------------------------------------- loss

double cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                     std::span<const std::uint8_t> mask, Eigen::MatrixXd* grad) {
  const auto n = static_cast<std::size_t>(logits.rows());
  check_mask_length(mask, n, "loss");
  if (labels.size() != n) throw DimMismatch("label count differs from logits rows");
  long count = 0;
  for (auto m : mask) count += m != 0;
  if (count == 0) throw EmptyMask("train");

  if (grad) *grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(count);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const auto row = logits.row(static_cast<Eigen::Index>(i));
    const double m = row.maxCoeff();
    const Eigen::RowVectorXd shifted = row.array() - m;
    const double log_z = std::log(shifted.array().exp().sum());
    loss -= (shifted(labels[i]) - log_z) * scale;
    if (grad) {
      auto g = grad->row(static_cast<Eigen::Index>(i));
      g = (shifted.array() - log_z).exp() * scale;
      g(labels[i]) -= scale;
    }
  }
  return loss;
}

std::vector<int> predict(const Eigen::MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

// ---------------------------------------------------------------- Adam

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw DimMismatch("optimizer state does not match parameter list");
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto g = params[k]->grad.array();
    m_[k].array() = opt_.beta1 * m_[k].array() + (1.0 - opt_.beta1) * g;
    v_[k].array() = opt_.beta2 * v_[k].array() + (1.0 - opt_.beta2) * g.square();
    params[k]->value.array() -= opt_.lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + opt_.eps);
  }
}

// ---------------------------------------------------------------- training

TrainRecord train(MultiScaleModel& model, std::span<const Graph> graphs, const Eigen::MatrixXd& features,
                  std::span<const int> labels, const NodeMasks& masks, std::uint64_t seed,
                  const TrainOptions& options) {
  if (graphs.size() != model.n_encoders()) throw SlotCountMismatch(graphs.size(), model.n_encoders());
  const auto n = static_cast<std::size_t>(features.rows());
  for (const auto& g : graphs) {
    if (static_cast<std::size_t>(g.n_nodes) != n) throw DimMismatch("graph slots must share one node set");
  }
  if (labels.size() != n) throw DimMismatch("label count differs from feature rows");
  check_mask_length(masks.train, n, "train");
  check_mask_length(masks.val, n, "val");
  check_mask_length(masks.test, n, "test");
  require_nonempty(masks.train, "train");
  require_nonempty(masks.val, "val");
  require_nonempty(masks.test, "test");
  if (options.epochs < 1) throw InvalidConfig("epochs must be positive");

  std::vector<GraphOperator> train_ops, full_ops;
  for (const auto& g : graphs) {
    train_ops.push_back(make_operator(g, masks.train));
    full_ops.push_back(make_operator(g));
  }
  std::vector<const GraphOperator*> train_slots, full_slots;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    train_slots.push_back(&train_ops[k]);
    full_slots.push_back(&full_ops[k]);
  }
  const SparseRows x = to_sparse(features);

  TrainRecord record;
  record.seed = seed;
  record.epochs.reserve(static_cast<std::size_t>(options.epochs));
  Adam adam(options.adam);
  const auto params = model.parameters();
  std::vector<Eigen::MatrixXd> best_params;
  std::vector<int> best_predictions;
  double best_val = -1.0;
  Eigen::MatrixXd grad;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    model.zero_grad();
    const Eigen::MatrixXd train_logits = model.forward(train_slots, x);
    const double loss = cross_entropy(train_logits, labels, masks.train, &grad);
    model.backward(grad);
    adam.step(params);

    const std::vector<int> predicted = predict(model.forward(full_slots, x));
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss;
    m.train_accuracy = masked_accuracy(predicted, labels, masks.train);
    m.val_accuracy = masked_accuracy(predicted, labels, masks.val);
    m.test_accuracy = masked_accuracy(predicted, labels, masks.test);
    record.epochs.push_back(m);

    if (m.val_accuracy > best_val) {
      best_val = m.val_accuracy;
      record.checkpoint_epoch = epoch;
      best_params = model.snapshot();
      best_predictions = predicted;
    }
  }

  model.restore(best_params);
  record.checkpoint_val_accuracy = best_val;
  record.test_accuracy = record.epochs[static_cast<std::size_t>(record.checkpoint_epoch - 1)].test_accuracy;
  for (std::size_t i = 0; i < n; ++i) {
    if (!masks.test[i]) continue;
    record.test_nodes.push_back(static_cast<int>(i));
    record.test_scores.push_back(best_predictions[i] == labels[i] ? 1 : 0);
  }
  return record;
}

double gradient_check(MultiScaleModel& model, std::span<const Graph> graphs, const Eigen::MatrixXd& features,
                      std::span<const int> labels, std::span<const std::uint8_t> mask, double step) {
  std::vector<GraphOperator> ops;
  for (const auto& g : graphs) ops.push_back(make_operator(g));
  std::vector<const GraphOperator*> slots;
  for (const auto& op : ops) slots.push_back(&op);
  const SparseRows x = to_sparse(features);

  auto loss_at = [&] { return cross_entropy(model.forward(slots, x), labels, mask, nullptr); };

  model.zero_grad();
  Eigen::MatrixXd grad;
  cross_entropy(model.forward(slots, x), labels, mask, &grad);
  model.backward(grad);

  constexpr double kFloor = 1e-6;
  double worst = 0.0;
  for (Parameter* p : model.parameters()) {
    const Eigen::MatrixXd analytic = p->grad;
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& v = p->value.data()[k];
      const double saved = v;
      v = saved + step;
      const double up = loss_at();
      v = saved - step;
      const double down = loss_at();
      v = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), kFloor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace lrg::nn
