#include "lrg/sbm.hpp"

#include "lrg/errors.hpp"
#include "lrg/rng.hpp"

namespace lrg {

Graph generate_sbm(const SbmConfig& config, std::uint64_t seed) {
  if (config.n_nodes < 1 || config.n_blocks < 1 || config.feature_dim < 1) {
    throw InvalidConfig("sbm needs positive node, block and feature counts");
  }
  if (!(config.p_in >= 0.0 && config.p_in <= 1.0 && config.p_out >= 0.0 && config.p_out <= 1.0)) {
    throw InvalidConfig("sbm edge probabilities must lie in [0, 1]");
  }
  const int n = config.n_nodes;
  CounterRng rng(seed, "sbm");

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[i] = i % config.n_blocks;

  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const double p = labels[u] == labels[v] ? config.p_in : config.p_out;
      if (rng.uniform() < p) edges.emplace_back(u, v);
    }
  }

  Eigen::MatrixXd centroids(config.n_blocks, config.feature_dim);
  for (int b = 0; b < config.n_blocks; ++b)
    for (int j = 0; j < config.feature_dim; ++j) centroids(b, j) = config.signal * rng.normal();
  Eigen::MatrixXd features(n, config.feature_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < config.feature_dim; ++j) features(i, j) = centroids(labels[i], j) + rng.normal();

  return make_graph(n, std::move(edges), std::move(features), std::move(labels));
}

}  // namespace lrg
