#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include <Eigen/Dense>

#include "lrg/graph.hpp"
#include "lrg/rng.hpp"
#include "lrg/spectral.hpp"

namespace lrg::testing {

inline Graph graph_from_edges(int n, std::vector<Edge> edges, int feature_dim = 1) {
  return make_graph(n, std::move(edges), Eigen::MatrixXd::Zero(n, feature_dim), std::vector<int>(n, 0));
}

inline Graph path_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return graph_from_edges(n, e);
}

inline Graph complete_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return graph_from_edges(n, e);
}

/// Two triangles {0,1,2} and {3,4,5} joined by the bridge 2-3.
inline Graph barbell_graph() {
  return graph_from_edges(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}});
}

/// Random connected graph: random recursive tree plus Erdos-Renyi extras.
inline Graph random_connected_graph(CounterRng& rng, int n, double extra_p) {
  std::vector<Edge> e;
  for (int i = 1; i < n; ++i) e.emplace_back(i, static_cast<int>(rng.below(static_cast<std::uint64_t>(i))));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < extra_p) e.emplace_back(i, j);
  return graph_from_edges(n, e);
}

inline LaplacianSpectrum spectrum_of(const Graph& g) { return eigendecompose(laplacian(g)); }

/// exp(M) by scaling and squaring with a truncated Taylor series. Independent
/// of any eigensolver.
inline Eigen::MatrixXd expm_taylor(const Eigen::MatrixXd& m) {
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.25) {
    scale *= 0.5;
    ++squarings;
  }
  const Eigen::MatrixXd a = m * scale;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = (term * a / static_cast<double>(k)).eval();
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = (sum * sum).eval();
  return sum;
}

/// rho(tau) from the Taylor oracle.
inline Eigen::MatrixXd oracle_propagator(const Graph& g, double tau) {
  const Eigen::MatrixXd heat = expm_taylor(-tau * laplacian(g).values);
  return heat / heat.trace();
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lrg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::FILE* f = std::fopen(p.c_str(), "wb");
  std::fwrite(content.data(), 1, content.size(), f);
  std::fclose(f);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::string out;
  std::FILE* f = std::fopen(p.c_str(), "rb");
  if (!f) return out;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, got);
  std::fclose(f);
  return out;
}

}  // namespace lrg::testing
