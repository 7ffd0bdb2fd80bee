#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "lrg/errors.hpp"
#include "lrg/nn.hpp"
#include "lrg/sbm.hpp"
#include "test_support.hpp"

using namespace lrg;
using namespace lrg::nn;
using namespace lrg::testing;

namespace {

Eigen::MatrixXd random_features(CounterRng& rng, int n, int d) {
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
  return x;
}

void set_identity(Parameter& p) { p.value = Eigen::MatrixXd::Identity(p.value.rows(), p.value.cols()); }

EncoderConfig config_of(EncoderKind kind, int in, int hidden, int out, int heads = 1) {
  return EncoderConfig{kind, in, hidden, out, heads};
}

std::vector<std::uint8_t> all_nodes(int n) { return std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1); }

// Node permutation: new index of old node i is perm[i].
Graph permute(const Graph& g, const std::vector<int>& perm) {
  std::vector<Edge> edges;
  for (const auto& [u, v] : g.edges) edges.emplace_back(perm[u], perm[v]);
  Eigen::MatrixXd f(g.n_nodes, g.feature_dim());
  std::vector<int> labels(static_cast<std::size_t>(g.n_nodes));
  for (int i = 0; i < g.n_nodes; ++i) {
    f.row(perm[i]) = g.features.row(i);
    labels[perm[i]] = g.labels[i];
  }
  return make_graph(g.n_nodes, edges, f, labels);
}

NodeMasks sbm_masks(int n) {
  NodeMasks m;
  m.train.assign(n, 0);
  m.val.assign(n, 0);
  m.test.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const int r = (i / 3) % 5;  // keeps every class in every split
    if (r < 3) m.train[i] = 1;
    else if (r == 3) m.val[i] = 1;
    else m.test[i] = 1;
  }
  return m;
}

}  // namespace

TEST_CASE("GCN examples") {
  CounterRng rng(1, "gcn-example");
  SUBCASE("K2 averages the two feature values") {
    GcnEncoder enc(config_of(EncoderKind::Gcn, 1, 1, 1), rng);
    set_identity(enc.w1);
    set_identity(enc.w2);
    Eigen::MatrixXd x(2, 1);
    x << 1.0, 0.0;
    const SparseRows sx = to_sparse(x);
    const GraphOperator op = make_operator(complete_graph(2));
    const Eigen::MatrixXd out = enc.forward(op, sx);
    CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("edgeless graph with identity weights is ReLU(X)") {
    GcnEncoder enc(config_of(EncoderKind::Gcn, 3, 3, 3), rng);
    set_identity(enc.w1);
    set_identity(enc.w2);
    const Eigen::MatrixXd x = random_features(rng, 4, 3);
    const SparseRows sx = to_sparse(x);
    const GraphOperator op = make_operator(graph_from_edges(4, {}));
    CHECK((enc.forward(op, sx) - x.cwiseMax(0.0)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("normalized operator") {
  const GraphOperator op = make_operator(path_graph(3));
  const Eigen::MatrixXd a = Eigen::MatrixXd(op.gcn);
  CHECK(a(0, 0) == doctest::Approx(0.5));
  CHECK(a(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(a(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(a(0, 2) == 0.0);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(op.offsets == std::vector<int>{0, 2, 5, 7});
  CHECK(op.neighbors == std::vector<int>{0, 1, 0, 1, 2, 1, 2});

  const std::vector<std::uint8_t> keep{1, 1, 0};
  const GraphOperator masked = make_operator(path_graph(3), keep);
  CHECK(masked.neighbors == std::vector<int>{0, 1, 0, 1, 2});
}

TEST_CASE("encoders are permutation equivariant") {
  CounterRng rng(2, "equivariance");
  for (EncoderKind kind : {EncoderKind::Gcn, EncoderKind::Gat}) {
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 8 + static_cast<int>(rng.below(12));
      Graph g = random_connected_graph(rng, n, 0.2);
      g.features = random_features(rng, n, 5);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      lrg::shuffle(perm.begin(), perm.end(), rng);
      const Graph pg = permute(g, perm);

      CounterRng init(trial, "enc");
      auto enc = make_encoder(config_of(kind, 5, 6, 4, kind == EncoderKind::Gat ? 2 : 1), init);
      const GraphOperator op = make_operator(g), pop = make_operator(pg);
      const SparseRows x = to_sparse(g.features), px = to_sparse(pg.features);
      const Eigen::MatrixXd out = enc->forward(op, x);
      const Eigen::MatrixXd pout = enc->forward(pop, px);
      double worst = 0.0;
      for (int i = 0; i < n; ++i) worst = std::max(worst, (out.row(i) - pout.row(perm[i])).cwiseAbs().maxCoeff());
      CHECK(worst < 1e-10);
    }
  }
}

TEST_CASE("GAT attention examples") {
  CounterRng rng(3, "gat-example");
  SUBCASE("isolated node attends only to itself") {
    GatEncoder enc(config_of(EncoderKind::Gat, 2, 3, 2, 2), rng);
    const Graph g = graph_from_edges(4, {{0, 1}, {1, 2}});
    const GraphOperator op = make_operator(g);
    const SparseRows x = to_sparse(random_features(rng, 4, 2));
    enc.forward(op, x);
    const int e = op.offsets[3];
    REQUIRE(op.offsets[4] - e == 1);
    for (int layer = 0; layer < 2; ++layer)
      for (int head = 0; head < 2; ++head) CHECK(enc.attention(layer, head)[e] == 1.0);
  }
  SUBCASE("zero attention vectors give mean aggregation") {
    GatEncoder enc(config_of(EncoderKind::Gat, 3, 3, 3), rng);
    set_identity(enc.w1);
    set_identity(enc.w2);
    enc.att_src1.value.setZero();
    enc.att_dst1.value.setZero();
    enc.att_src2.value.setZero();
    enc.att_dst2.value.setZero();
    const Graph g = random_connected_graph(rng, 7, 0.3);
    const Eigen::MatrixXd x = random_features(rng, 7, 3);
    const SparseRows sx = to_sparse(x);
    const GraphOperator op = make_operator(g);

    Eigen::MatrixXd mean_op = g.adjacency_matrix() + Eigen::MatrixXd::Identity(7, 7);
    for (int i = 0; i < 7; ++i) mean_op.row(i) /= mean_op.row(i).sum();
    const Eigen::MatrixXd h1 = (mean_op * x).unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
    const Eigen::MatrixXd expected = mean_op * h1;
    CHECK((enc.forward(op, sx) - expected).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("attention rows are distributions") {
    GatEncoder enc(config_of(EncoderKind::Gat, 4, 5, 3, 3), rng);
    const Graph g = random_connected_graph(rng, 30, 0.15);
    const GraphOperator op = make_operator(g);
    const SparseRows x = to_sparse(random_features(rng, 30, 4) * 5.0);
    enc.forward(op, x);
    double worst = 0.0;
    for (int layer = 0; layer < 2; ++layer) {
      for (int head = 0; head < 3; ++head) {
        const auto& a = enc.attention(layer, head);
        for (int i = 0; i < op.n_nodes; ++i) {
          double s = 0.0;
          for (int e = op.offsets[i]; e < op.offsets[i + 1]; ++e) {
            CHECK(a[e] >= 0.0);
            s += a[e];
          }
          worst = std::max(worst, std::abs(s - 1.0));
        }
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("analytic gradients match central differences") {
  CounterRng rng(4, "gradcheck");
  SUBCASE("GCN on K3") {
    const Graph g = complete_graph(3);
    MultiScaleModel model({config_of(EncoderKind::Gcn, 3, 4, 3)}, 2, 11);
    const Eigen::MatrixXd x = random_features(rng, 3, 3);
    const std::vector<int> labels{0, 1, 1};
    CHECK(gradient_check(model, std::vector<Graph>{g}, x, labels, all_nodes(3)) < 1e-4);
  }
  SUBCASE("GAT on P3") {
    const Graph g = path_graph(3);
    MultiScaleModel model({config_of(EncoderKind::Gat, 3, 4, 3)}, 2, 12);
    const Eigen::MatrixXd x = random_features(rng, 3, 3);
    const std::vector<int> labels{1, 0, 1};
    CHECK(gradient_check(model, std::vector<Graph>{g}, x, labels, all_nodes(3)) < 1e-4);
  }
  SUBCASE("multi-head GAT and GCN side by side on a random graph, partial mask") {
    const Graph g = random_connected_graph(rng, 9, 0.3);
    const Graph h = random_connected_graph(rng, 9, 0.1);
    MultiScaleModel model({config_of(EncoderKind::Gat, 4, 3, 3, 2), config_of(EncoderKind::Gcn, 4, 5, 2)}, 3, 13);
    const Eigen::MatrixXd x = random_features(rng, 9, 4);
    const std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1, 2};
    std::vector<std::uint8_t> mask = all_nodes(9);
    mask[4] = mask[7] = 0;
    CHECK(gradient_check(model, std::vector<Graph>{g, h}, x, labels, mask) < 1e-4);
  }
}

TEST_CASE("zero feature column has exactly zero first-layer gradient") {
  CounterRng rng(5, "zero-column");
  for (EncoderKind kind : {EncoderKind::Gcn, EncoderKind::Gat}) {
    const Graph g = random_connected_graph(rng, 6, 0.3);
    Eigen::MatrixXd x = random_features(rng, 6, 4);
    x.col(2).setZero();
    MultiScaleModel model({config_of(kind, 4, 5, 3)}, 2, 21);
    const std::vector<int> labels{0, 1, 0, 1, 0, 1};
    const Eigen::MatrixXd logits = model.forward(std::vector<Graph>{g}, x);
    Eigen::MatrixXd grad;
    const double base = cross_entropy(logits, labels, all_nodes(6), &grad);
    model.zero_grad();
    model.backward(grad);
    Parameter* w1 = model.encoder(0).parameters()[0];
    CHECK(w1->grad.row(2).cwiseAbs().maxCoeff() == 0.0);
    w1->value(2, 1) += 1e-5;
    CHECK(cross_entropy(model.forward(std::vector<Graph>{g}, x), labels, all_nodes(6), nullptr) == base);
  }
}

TEST_CASE("cross_entropy and Adam") {
  Eigen::MatrixXd logits(2, 2);
  logits << 0.0, 0.0, 2.0, 0.0;
  const std::vector<int> labels{0, 1};
  Eigen::MatrixXd grad;
  const double loss = cross_entropy(logits, labels, all_nodes(2), &grad);
  CHECK(loss == doctest::Approx((std::log(2.0) + std::log(1.0 + std::exp(2.0))) / 2.0));
  CHECK(grad.row(0).sum() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(grad(0, 0) == doctest::Approx(-0.25));
  CHECK_THROWS_AS(cross_entropy(logits, labels, std::vector<std::uint8_t>{0, 0}, nullptr), EmptyMask);

  // First Adam step moves every coordinate by lr against its gradient sign.
  Parameter p{"p", Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd(1, 3)};
  p.grad << 2.0, -0.5, 1e-3;
  Adam adam(AdamOptions{0.1, 0.9, 0.999, 1e-8});
  std::vector<Parameter*> ps{&p};
  adam.step(ps);
  CHECK(p.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(p.value(0, 2) == doctest::Approx(-0.1).epsilon(1e-4));
}

TEST_CASE("model slot and dimension errors") {
  const Graph g = path_graph(3);
  MultiScaleModel model({config_of(EncoderKind::Gcn, 2, 2, 2), config_of(EncoderKind::Gcn, 2, 2, 2)}, 2, 1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  CHECK_THROWS_AS(model.forward(std::vector<Graph>{g}, x), SlotCountMismatch);
  CHECK_THROWS_AS(model.forward(std::vector<Graph>{g, g}, Eigen::MatrixXd::Ones(3, 3)), DimMismatch);
  CHECK_THROWS_AS(model.forward(std::vector<Graph>{g, path_graph(4)}, x), DimMismatch);
  CHECK_THROWS_AS(MultiScaleModel({}, 2, 1), InvalidConfig);
}

TEST_CASE("training") {
  SbmConfig sc;
  sc.n_nodes = 60;
  sc.n_blocks = 2;
  sc.feature_dim = 8;
  sc.signal = 0.0;  // features carry no label information
  const Graph g = generate_sbm(sc, 5);
  const NodeMasks masks = sbm_masks(g.n_nodes);
  const std::vector<Graph> slots{g};
  const std::vector<EncoderConfig> enc{config_of(EncoderKind::Gcn, 8, 64, 64)};

  SUBCASE("fits a planted partition") {
    MultiScaleModel model(enc, g.n_classes(), 0);
    const TrainRecord r = train(model, slots, g.features, g.labels, masks, 0);
    REQUIRE(r.epochs.size() == 1000);
    const auto& last = r.epochs.back();
    CHECK(last.train_accuracy >= 0.9);
    for (int e = 1; e < 10; ++e) {
      CHECK(std::isfinite(r.epochs[e].train_loss));
      CHECK(r.epochs[e].train_loss <= r.epochs[e - 1].train_loss);
    }
  }
  SUBCASE("zero learning rate leaves parameters untouched") {
    MultiScaleModel model(enc, g.n_classes(), 0);
    const auto before = model.snapshot();
    TrainOptions opt;
    opt.epochs = 5;
    opt.adam.lr = 0.0;
    const TrainRecord r = train(model, slots, g.features, g.labels, masks, 0, opt);
    const auto after = model.snapshot();
    for (std::size_t k = 0; k < before.size(); ++k) CHECK((before[k].array() == after[k].array()).all());
    for (const auto& m : r.epochs) CHECK(m.train_loss == r.epochs.front().train_loss);
    CHECK(r.checkpoint_epoch == 1);
  }
  SUBCASE("same seed gives bit-identical records; checkpoint replays") {
    TrainOptions opt;
    opt.epochs = 60;
    opt.adam.lr = 1e-2;
    MultiScaleModel a({config_of(EncoderKind::Gat, 8, 8, 8, 2)}, g.n_classes(), 9);
    MultiScaleModel b({config_of(EncoderKind::Gat, 8, 8, 8, 2)}, g.n_classes(), 9);
    const TrainRecord ra = train(a, slots, g.features, g.labels, masks, 9, opt);
    const TrainRecord rb = train(b, slots, g.features, g.labels, masks, 9, opt);
    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (std::size_t e = 0; e < ra.epochs.size(); ++e) {
      CHECK(ra.epochs[e].train_loss == rb.epochs[e].train_loss);
      CHECK(ra.epochs[e].val_accuracy == rb.epochs[e].val_accuracy);
    }
    CHECK(ra.test_scores == rb.test_scores);
    CHECK(ra.checkpoint_epoch == rb.checkpoint_epoch);

    double best = -1.0;
    int best_epoch = 0;
    for (const auto& m : ra.epochs) {
      if (m.val_accuracy > best) {
        best = m.val_accuracy;
        best_epoch = m.epoch;
      }
    }
    CHECK(ra.checkpoint_epoch == best_epoch);

    const std::vector<int> pred = predict(a.forward(slots, g.features));
    std::vector<std::uint8_t> replay;
    for (int i : ra.test_nodes) replay.push_back(pred[i] == g.labels[i] ? 1 : 0);
    CHECK(replay == ra.test_scores);
    const double acc = std::accumulate(replay.begin(), replay.end(), 0.0) / static_cast<double>(replay.size());
    CHECK(acc == doctest::Approx(ra.test_accuracy).epsilon(1e-15));
  }
  SUBCASE("training signal never sees non-train features") {
    Eigen::MatrixXd leaked = g.features;
    for (int i = 0; i < g.n_nodes; ++i)
      if (!masks.train[i]) leaked.row(i).setConstant(1e3);
    TrainOptions opt;
    opt.epochs = 3;
    MultiScaleModel a(enc, g.n_classes(), 4), b(enc, g.n_classes(), 4);
    const TrainRecord ra = train(a, slots, g.features, g.labels, masks, 4, opt);
    const TrainRecord rb = train(b, slots, leaked, g.labels, masks, 4, opt);
    for (int e = 0; e < 3; ++e) CHECK(ra.epochs[e].train_loss == rb.epochs[e].train_loss);
  }
  SUBCASE("empty masks are rejected") {
    MultiScaleModel model(enc, g.n_classes(), 0);
    NodeMasks bad = masks;
    std::fill(bad.val.begin(), bad.val.end(), 0);
    CHECK_THROWS_AS(train(model, slots, g.features, g.labels, bad, 0), EmptyMask);
  }
}
