#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lrg {

using Edge = std::pair<int, int>;

/// Undirected, unweighted simple graph with node features and labels.
///
/// Edges are stored once each as (u, v) with u < v, sorted and unique.
/// `node_ids` carries the identifiers of the source dataset so that rows can
/// be traced back after component extraction.
struct Graph {
  int n_nodes = 0;
  std::vector<Edge> edges;
  Eigen::MatrixXd features;  // n_nodes x d
  std::vector<int> labels;   // n_nodes, values in [0, n_classes)
  std::vector<std::int64_t> node_ids;

  int n_classes() const;
  int feature_dim() const { return static_cast<int>(features.cols()); }
  std::size_t n_edges() const { return edges.size(); }

  /// Sorted neighbor lists.
  std::vector<std::vector<int>> adjacency_lists() const;

  /// Dense 0/1 adjacency matrix.
  Eigen::MatrixXd adjacency_matrix() const;

  bool operator==(const Graph& other) const;
};

enum class Split : std::uint8_t { Train, Val, Test };

/// A graph together with its optional node split as read from disk.
struct Dataset {
  Graph graph;
  std::optional<std::vector<Split>> split;
};

/// L = D - A, stored densely.
struct LaplacianMatrix {
  Eigen::MatrixXd values;
};

/// Sorts each pair as (min, max), drops self-loops and duplicates.
std::vector<Edge> canonicalize_edges(std::vector<Edge> edges);

/// Builds a graph from a raw (possibly directed, possibly duplicated) edge list.
/// Throws NodeIndexOutOfRange on dangling references. `node_ids` defaults to 0..n-1.
Graph make_graph(int n_nodes, std::vector<Edge> edges, Eigen::MatrixXd features,
                 std::vector<int> labels, std::vector<std::int64_t> node_ids = {});

/// Reads edges.tsv, features.csv, labels.csv and (if present) masks.csv.
Dataset load_dataset(const std::filesystem::path& dir);
Graph load_graph(const std::filesystem::path& dir);

/// Writes the canonical text format. Features are printed with 17 significant
/// digits so a save/load cycle is lossless.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Node indices of the largest connected component, ascending. Ties between
/// equal-size components go to the one with the smallest minimum original id.
std::vector<int> largest_component_nodes(const Graph& g);

/// Induced subgraph on `nodes` (ascending), re-indexed densely.
Graph induced_subgraph(const Graph& g, std::span<const int> nodes);

Graph largest_connected_component(const Graph& g);
Dataset largest_connected_component(const Dataset& d);

/// Number of connected components.
int count_components(const Graph& g);

LaplacianMatrix laplacian(const Graph& g);

}  // namespace lrg
