#pragma once

#include <cstdint>

#include "lrg/graph.hpp"

namespace lrg {

/// Planted-partition stochastic block model with Gaussian node features.
/// Node i belongs to block i % n_blocks. Features are a per-block centroid
/// (standard normal, scaled by `signal`) plus unit Gaussian noise.
struct SbmConfig {
  int n_nodes = 60;
  int n_blocks = 3;
  double p_in = 0.5;
  double p_out = 0.02;
  int feature_dim = 8;
  double signal = 1.0;
};

/// Deterministic in (config, seed). Draws come from the "sbm" stream.
Graph generate_sbm(const SbmConfig& config, std::uint64_t seed);

}  // namespace lrg
