#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "lrg/graph.hpp"

namespace lrg {

/// Eigenpairs of a graph Laplacian. Eigenvalues ascending; column k of
/// `eigenvectors` pairs with `eigenvalues[k]`.
struct LaplacianSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  int size() const { return static_cast<int>(eigenvalues.size()); }
};

struct ScalePeak {
  double tau = 0.0;
  double heat_capacity = 0.0;
};

struct EntropyScan {
  std::vector<double> taus;
  std::vector<double> entropy;
  std::vector<double> heat_capacity;
  std::vector<ScalePeak> characteristic_scales;  // descending heat capacity
};

/// Default scan grid.
inline constexpr double kDefaultTauMin = 1e-2;
inline constexpr double kDefaultTauMax = 1e3;
inline constexpr int kDefaultScanPoints = 300;

/// Relative threshold (fraction of max C) a local maximum must reach.
inline constexpr double kPeakThreshold = 0.25;

/// Full dense symmetric eigendecomposition. The smallest eigenvalue is clamped
/// to exactly 0; when it is simple (connected graph) its eigenvector is set to
/// the exact constant vector 1/sqrt(n).
LaplacianSpectrum eigendecompose(const LaplacianMatrix& l);

/// Normalized heat-kernel spectrum mu_i = exp(-tau (lambda_i - lambda_min)) / Z.
Eigen::VectorXd propagator_eigenvalues(const LaplacianSpectrum& spectrum, double tau);

/// Von Neumann entropy of the propagator, normalized by log N.
double von_neumann_entropy(const LaplacianSpectrum& spectrum, double tau);

/// `points` log-spaced diffusion times covering [tau_min, tau_max] inclusive.
std::vector<double> log_grid(double tau_min, double tau_max, int points);

/// Entropy and heat capacity C = -dS/dlog(tau) over a log grid, with peaks.
EntropyScan entropy_scan(const LaplacianSpectrum& spectrum, double tau_min = kDefaultTauMin,
                         double tau_max = kDefaultTauMax, int points = kDefaultScanPoints);

/// Local maxima of C at or above kPeakThreshold * max C, position refined by a
/// parabola through the neighbouring (log tau, C) samples. May be empty.
std::vector<ScalePeak> find_peaks(std::span<const double> taus, std::span<const double> heat_capacity);

/// As find_peaks, but throws NoPeak when nothing qualifies.
std::vector<ScalePeak> detect_peaks(const EntropyScan& scan);

/// scan.csv (tau,entropy,heat_capacity) and peaks.csv (tau_star,c_value,rank).
void write_scan_csv(const EntropyScan& scan, const std::filesystem::path& path);
void write_peaks_csv(const std::vector<ScalePeak>& peaks, const std::filesystem::path& path);

}  // namespace lrg
