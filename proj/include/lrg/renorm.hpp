#pragma once

#include <vector>

#include <Eigen/Dense>

#include "lrg/graph.hpp"
#include "lrg/spectral.hpp"

namespace lrg {

/// Trace-normalized heat kernel rho(tau) = exp(-tau L) / Tr exp(-tau L).
struct Propagator {
  Eigen::MatrixXd values;
  double tau = 0.0;
};

/// Node -> macro-node assignment. Ids are dense and numbered in order of each
/// macro-node's smallest member.
struct MacroNodePartition {
  std::vector<int> assignment;
  int n_macro = 0;
  double tau = 0.0;

  std::vector<std::vector<int>> members() const;
};

/// Same node set, features and labels as the input graph, rewired so that the
/// members of a macro-node share one neighbourhood and have no edges among
/// themselves.
struct RenormalizedGraph {
  Graph graph;
  MacroNodePartition partition;
};

Propagator propagator_matrix(const LaplacianSpectrum& spectrum, double tau);

/// Connected components of the merge relation rho_ij > min(rho_ii, rho_jj).
MacroNodePartition macro_node_partition(const Propagator& rho);

RenormalizedGraph rewire(const Graph& g, const MacroNodePartition& partition);

/// laplacian -> eigendecompose -> propagator -> partition -> rewire.
RenormalizedGraph renormalize_at(const Graph& g, double tau);

/// Same pipeline reusing a precomputed spectrum of `g`'s Laplacian.
RenormalizedGraph renormalize_at(const Graph& g, const LaplacianSpectrum& spectrum, double tau);

}  // namespace lrg
