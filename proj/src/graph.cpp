#include "lrg/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include <fmt/os.h>

#include "lrg/errors.hpp"
#include "lrg/union_find.hpp"

namespace lrg {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

/// Calls `fn(line, line_no)` for every non-blank, non-comment line.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path.string());
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    fn(line, line_no);
  }
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && !token.empty();
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  std::vector<int> labels;
  for_each_record(path, [&](std::string_view line, std::size_t line_no) {
    int label = 0;
    if (!parse_number(line, label) || label < 0) {
      throw MalformedLine(path.string(), line_no, "expected a non-negative integer class id");
    }
    labels.push_back(label);
  });
  return labels;
}

Eigen::MatrixXd read_features(const std::filesystem::path& path, std::size_t n_rows) {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  for_each_record(path, [&](std::string_view line, std::size_t line_no) {
    const auto tokens = split_commas(line);
    if (rows == 0) {
      cols = tokens.size();
    } else if (tokens.size() != cols) {
      throw MalformedLine(path.string(), line_no,
                          fmt::format("expected {} columns, found {}", cols, tokens.size()));
    }
    if (rows == n_rows) {
      throw MalformedLine(path.string(), line_no,
                          fmt::format("more feature rows than the {} labelled nodes", n_rows));
    }
    for (auto token : tokens) {
      double v = 0.0;
      if (!parse_number(token, v)) {
        throw MalformedLine(path.string(), line_no, "unparseable real '" + std::string(token) + "'");
      }
      values.push_back(v);
    }
    ++rows;
  });
  if (rows != n_rows) {
    throw MalformedLine(path.string(), rows + 1,
                        fmt::format("expected {} feature rows, found {}", n_rows, rows));
  }
  Eigen::MatrixXd features(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
    }
  }
  return features;
}

std::vector<Edge> read_edges(const std::filesystem::path& path, std::size_t n_nodes) {
  std::vector<Edge> edges;
  for_each_record(path, [&](std::string_view line, std::size_t line_no) {
    const auto tokens = split_whitespace(line);
    long long u = 0;
    long long v = 0;
    if (tokens.size() != 2 || !parse_number(tokens[0], u) || !parse_number(tokens[1], v)) {
      throw MalformedLine(path.string(), line_no, "expected two integer node ids");
    }
    for (long long x : {u, v}) {
      if (x < 0 || static_cast<unsigned long long>(x) >= n_nodes) {
        throw NodeIndexOutOfRange(x, n_nodes);
      }
    }
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  });
  return edges;
}

std::vector<Split> read_masks(const std::filesystem::path& path, std::size_t n_nodes) {
  std::vector<Split> split;
  for_each_record(path, [&](std::string_view line, std::size_t line_no) {
    if (line == "train") {
      split.push_back(Split::Train);
    } else if (line == "val") {
      split.push_back(Split::Val);
    } else if (line == "test") {
      split.push_back(Split::Test);
    } else {
      throw MalformedLine(path.string(), line_no, "expected one of train/val/test");
    }
  });
  if (split.size() != n_nodes) {
    throw MalformedLine(path.string(), split.size() + 1,
                        fmt::format("expected {} mask rows, found {}", n_nodes, split.size()));
  }
  return split;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "test";
}

}  // namespace

int Graph::n_classes() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<std::vector<int>> Graph::adjacency_lists() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_nodes));
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

Eigen::MatrixXd Graph::adjacency_matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
  for (const auto& [u, v] : edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

bool Graph::operator==(const Graph& other) const {
  return n_nodes == other.n_nodes && edges == other.edges && labels == other.labels &&
         node_ids == other.node_ids && features.rows() == other.features.rows() &&
         features.cols() == other.features.cols() && features == other.features;
}

std::vector<Edge> canonicalize_edges(std::vector<Edge> edges) {
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  for (auto& [u, v] : edges) {
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

Graph make_graph(int n_nodes, std::vector<Edge> edges, Eigen::MatrixXd features,
                 std::vector<int> labels, std::vector<std::int64_t> node_ids) {
  for (const auto& [u, v] : edges) {
    for (int x : {u, v}) {
      if (x < 0 || x >= n_nodes) throw NodeIndexOutOfRange(x, static_cast<std::size_t>(n_nodes));
    }
  }
  if (features.rows() != n_nodes) {
    throw DimMismatch(fmt::format("features have {} rows for {} nodes", features.rows(), n_nodes));
  }
  if (static_cast<int>(labels.size()) != n_nodes) {
    throw DimMismatch(fmt::format("{} labels for {} nodes", labels.size(), n_nodes));
  }
  if (node_ids.empty()) {
    node_ids.resize(static_cast<std::size_t>(n_nodes));
    std::iota(node_ids.begin(), node_ids.end(), std::int64_t{0});
  } else if (static_cast<int>(node_ids.size()) != n_nodes) {
    throw DimMismatch(fmt::format("{} node ids for {} nodes", node_ids.size(), n_nodes));
  }
  Graph g;
  g.n_nodes = n_nodes;
  g.edges = canonicalize_edges(std::move(edges));
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.node_ids = std::move(node_ids);
  return g;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto labels_path = dir / "labels.csv";
  const auto features_path = dir / "features.csv";
  const auto edges_path = dir / "edges.tsv";
  for (const auto& p : {edges_path, features_path, labels_path}) {
    if (!std::filesystem::is_regular_file(p)) throw MissingFile(p.string());
  }
  auto labels = read_labels(labels_path);
  const std::size_t n = labels.size();
  auto features = read_features(features_path, n);
  auto edges = read_edges(edges_path, n);

  Dataset d;
  d.graph = make_graph(static_cast<int>(n), std::move(edges), std::move(features), std::move(labels));
  const auto masks_path = dir / "masks.csv";
  if (std::filesystem::is_regular_file(masks_path)) d.split = read_masks(masks_path, n);
  return d;
}

Graph load_graph(const std::filesystem::path& dir) { return load_dataset(dir).graph; }

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Graph& g = dataset.graph;
  {
    auto out = fmt::output_file((dir / "edges.tsv").string());
    for (const auto& [u, v] : g.edges) out.print("{}\t{}\n", u, v);
  }
  {
    auto out = fmt::output_file((dir / "features.csv").string());
    std::string row;
    for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
      row.clear();
      for (Eigen::Index j = 0; j < g.features.cols(); ++j) {
        if (j > 0) row.push_back(',');
        row += fmt::format("{:.17g}", g.features(i, j));
      }
      out.print("{}\n", row);
    }
  }
  {
    auto out = fmt::output_file((dir / "labels.csv").string());
    for (int label : g.labels) out.print("{}\n", label);
  }
  const auto masks_path = dir / "masks.csv";
  if (dataset.split) {
    auto out = fmt::output_file(masks_path.string());
    for (Split s : *dataset.split) out.print("{}\n", split_name(s));
  } else {
    std::filesystem::remove(masks_path);
  }
}

std::vector<int> largest_component_nodes(const Graph& g) {
  if (g.n_nodes == 0) throw EmptyGraph();
  DisjointSet sets(g.n_nodes);
  for (const auto& [u, v] : g.edges) sets.unite(u, v);

  // Per root: size and smallest original id.
  std::vector<std::int64_t> min_id(static_cast<std::size_t>(g.n_nodes),
                                   std::numeric_limits<std::int64_t>::max());
  for (int i = 0; i < g.n_nodes; ++i) {
    auto& m = min_id[sets.find(i)];
    m = std::min(m, g.node_ids[i]);
  }
  int best = -1;
  for (int i = 0; i < g.n_nodes; ++i) {
    if (sets.find(i) != i) continue;
    if (best < 0 || sets.set_size(i) > sets.set_size(best) ||
        (sets.set_size(i) == sets.set_size(best) && min_id[i] < min_id[best])) {
      best = i;
    }
  }
  std::vector<int> nodes;
  nodes.reserve(static_cast<std::size_t>(sets.set_size(best)));
  for (int i = 0; i < g.n_nodes; ++i) {
    if (sets.find(i) == best) nodes.push_back(i);
  }
  return nodes;
}

Graph induced_subgraph(const Graph& g, std::span<const int> nodes) {
  std::vector<int> new_index(static_cast<std::size_t>(g.n_nodes), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) new_index[nodes[k]] = static_cast<int>(k);

  Graph sub;
  sub.n_nodes = static_cast<int>(nodes.size());
  for (const auto& [u, v] : g.edges) {
    if (new_index[u] >= 0 && new_index[v] >= 0) sub.edges.emplace_back(new_index[u], new_index[v]);
  }
  sub.edges = canonicalize_edges(std::move(sub.edges));
  sub.features.resize(sub.n_nodes, g.features.cols());
  sub.labels.resize(nodes.size());
  sub.node_ids.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    sub.features.row(static_cast<Eigen::Index>(k)) = g.features.row(nodes[k]);
    sub.labels[k] = g.labels[nodes[k]];
    sub.node_ids[k] = g.node_ids[nodes[k]];
  }
  return sub;
}

Graph largest_connected_component(const Graph& g) {
  const auto nodes = largest_component_nodes(g);
  return induced_subgraph(g, nodes);
}

Dataset largest_connected_component(const Dataset& d) {
  const auto nodes = largest_component_nodes(d.graph);
  Dataset out;
  out.graph = induced_subgraph(d.graph, nodes);
  if (d.split) {
    std::vector<Split> split;
    split.reserve(nodes.size());
    for (int i : nodes) split.push_back((*d.split)[i]);
    out.split = std::move(split);
  }
  return out;
}

int count_components(const Graph& g) {
  DisjointSet sets(g.n_nodes);
  for (const auto& [u, v] : g.edges) sets.unite(u, v);
  return sets.n_sets();
}

LaplacianMatrix laplacian(const Graph& g) {
  LaplacianMatrix l;
  l.values = Eigen::MatrixXd::Zero(g.n_nodes, g.n_nodes);
  for (const auto& [u, v] : g.edges) {
    l.values(u, v) = -1.0;
    l.values(v, u) = -1.0;
    l.values(u, u) += 1.0;
    l.values(v, v) += 1.0;
  }
  return l;
}

}  // namespace lrg
