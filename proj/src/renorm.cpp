#include "lrg/renorm.hpp"

#include <algorithm>
#include <utility>

#include "lrg/errors.hpp"
#include "lrg/union_find.hpp"

namespace lrg {

std::vector<std::vector<int>> MacroNodePartition::members() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_macro));
  for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(static_cast<int>(i));
  return out;
}

Propagator propagator_matrix(const LaplacianSpectrum& spectrum, double tau) {
  if (!(tau > 0.0)) throw NegativeTau(tau);
  const Eigen::VectorXd mu = propagator_eigenvalues(spectrum, tau);
  const auto& q = spectrum.eigenvectors;

  Propagator rho;
  rho.tau = tau;
  const Eigen::MatrixXd scaled = q * mu.cwiseSqrt().asDiagonal();
  const Eigen::Index n = q.rows();
  rho.values = Eigen::MatrixXd::Zero(n, n);
  rho.values.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  rho.values.triangularView<Eigen::StrictlyUpper>() = rho.values.transpose();
  return rho;
}

MacroNodePartition macro_node_partition(const Propagator& rho) {
  const auto& p = rho.values;
  const int n = static_cast<int>(p.rows());
  DisjointSet sets(n);
  for (int j = 0; j < n; ++j) {
    const double self_j = p(j, j);
    for (int i = 0; i < j; ++i) {
      if (p(i, j) > std::min(p(i, i), self_j)) sets.unite(i, j);
    }
  }
  MacroNodePartition partition;
  partition.assignment = sets.dense_labels();
  partition.n_macro = sets.n_sets();
  partition.tau = rho.tau;
  return partition;
}

RenormalizedGraph rewire(const Graph& g, const MacroNodePartition& partition) {
  if (partition.assignment.size() != static_cast<std::size_t>(g.n_nodes)) {
    throw PartitionSizeMismatch(partition.assignment.size(), static_cast<std::size_t>(g.n_nodes));
  }
  const auto& macro = partition.assignment;
  const int n_macro = partition.assignment.empty()
                          ? 0
                          : *std::max_element(macro.begin(), macro.end()) + 1;

  // Merge neighbourhoods at the macro level first, then drop intra-macro pairs.
  std::vector<std::pair<int, int>> macro_edges;
  macro_edges.reserve(g.edges.size());
  for (const auto& [u, v] : g.edges) {
    int a = macro[u];
    int b = macro[v];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    macro_edges.emplace_back(a, b);
  }
  std::sort(macro_edges.begin(), macro_edges.end());
  macro_edges.erase(std::unique(macro_edges.begin(), macro_edges.end()), macro_edges.end());

  std::vector<std::vector<int>> members(static_cast<std::size_t>(n_macro));
  for (int i = 0; i < g.n_nodes; ++i) members[macro[i]].push_back(i);

  std::vector<Edge> edges;
  for (const auto& [a, b] : macro_edges) {
    for (int u : members[a]) {
      for (int v : members[b]) edges.emplace_back(u, v);
    }
  }

  RenormalizedGraph out;
  out.graph.n_nodes = g.n_nodes;
  out.graph.edges = canonicalize_edges(std::move(edges));
  out.graph.features = g.features;
  out.graph.labels = g.labels;
  out.graph.node_ids = g.node_ids;
  out.partition = partition;
  return out;
}

RenormalizedGraph renormalize_at(const Graph& g, const LaplacianSpectrum& spectrum, double tau) {
  const auto rho = propagator_matrix(spectrum, tau);
  return rewire(g, macro_node_partition(rho));
}

RenormalizedGraph renormalize_at(const Graph& g, double tau) {
  if (!(tau > 0.0)) throw NegativeTau(tau);
  const auto spectrum = eigendecompose(laplacian(g));
  return renormalize_at(g, spectrum, tau);
}

}  // namespace lrg
