#include "lrg/spectral.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/os.h>
#include <lapacke.h>

#include "lrg/errors.hpp"

namespace lrg {

LaplacianSpectrum eigendecompose(const LaplacianMatrix& l) {
  const Eigen::Index n = l.values.rows();
  if (n == 0) throw EmptyGraph();
  LaplacianSpectrum s;
  s.eigenvectors = l.values;  // overwritten in place by the solver
  s.eigenvalues.resize(n);
  const auto order = static_cast<lapack_int>(n);
  // Divide-and-conquer; eigenvalues come back ascending.
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', order, s.eigenvectors.data(),
                                         order, s.eigenvalues.data());
  if (info != 0) {
    throw ConvergenceFailure(fmt::format("dsyevd failed with info = {}", info));
  }
  s.eigenvalues[0] = 0.0;

  const double zero_tol = 1e-8 * static_cast<double>(n);
  if (n == 1 || s.eigenvalues[1] > zero_tol) {
    s.eigenvectors.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  }
  return s;
}

Eigen::VectorXd propagator_eigenvalues(const LaplacianSpectrum& spectrum, double tau) {
  if (!(tau >= 0.0)) throw NegativeTau(tau);
  const auto& lambda = spectrum.eigenvalues;
  const double lambda_min = lambda.minCoeff();
  Eigen::VectorXd mu(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) mu[i] = std::exp(-tau * (lambda[i] - lambda_min));
  return mu / mu.sum();
}

double von_neumann_entropy(const LaplacianSpectrum& spectrum, double tau) {
  if (!(tau >= 0.0)) throw NegativeTau(tau);
  const auto& lambda = spectrum.eigenvalues;
  const Eigen::Index n = lambda.size();
  if (n < 2) return 0.0;
  if (tau == 0.0) return 1.0;

  // With x_i = tau (lambda_i - lambda_min) >= 0 and Z = sum exp(-x_i):
  //   -sum mu log mu = log Z + <x>_mu.
  // Z = 1 + tail, so log1p(tail) stays accurate when the tail is tiny.
  Eigen::Index argmin = 0;
  const double lambda_min = lambda.minCoeff(&argmin);
  double tail = 0.0;
  double weighted = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (i == argmin) continue;
    const double x = tau * (lambda[i] - lambda_min);
    const double w = std::exp(-x);
    tail += w;
    weighted += w * x;
  }
  const double z = 1.0 + tail;
  const double h = std::log1p(tail) + weighted / z;
  return std::clamp(h / std::log(static_cast<double>(n)), 0.0, 1.0);
}

std::vector<double> log_grid(double tau_min, double tau_max, int points) {
  if (!(tau_min > 0.0) || !(tau_max > tau_min)) {
    throw InvalidRange(fmt::format("need 0 < tau_min < tau_max, got [{}, {}]", tau_min, tau_max));
  }
  if (points < 2) throw InvalidRange("a log grid needs at least 2 points");
  std::vector<double> taus(static_cast<std::size_t>(points));
  const double lo = std::log(tau_min);
  const double step = (std::log(tau_max) - lo) / (points - 1);
  for (int k = 0; k < points; ++k) taus[k] = std::exp(lo + step * k);
  taus.front() = tau_min;
  taus.back() = tau_max;
  return taus;
}

EntropyScan entropy_scan(const LaplacianSpectrum& spectrum, double tau_min, double tau_max,
                         int points) {
  if (points < 8) throw InvalidRange(fmt::format("scan needs at least 8 points, got {}", points));
  EntropyScan scan;
  scan.taus = log_grid(tau_min, tau_max, points);
  const std::size_t m = scan.taus.size();
  scan.entropy.resize(m);
  scan.heat_capacity.resize(m);

  // Each grid point is independent; no cross-point reductions.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(m); ++k) {
    scan.entropy[k] = von_neumann_entropy(spectrum, scan.taus[k]);
  }

  std::vector<double> x(m);
  for (std::size_t k = 0; k < m; ++k) x[k] = std::log(scan.taus[k]);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = k + 1 == m ? k : k + 1;
    scan.heat_capacity[k] = -(scan.entropy[hi] - scan.entropy[lo]) / (x[hi] - x[lo]);
  }
  scan.characteristic_scales = find_peaks(scan.taus, scan.heat_capacity);
  return scan;
}

std::vector<ScalePeak> find_peaks(std::span<const double> taus, std::span<const double> c) {
  std::vector<ScalePeak> peaks;
  const std::size_t m = c.size();
  if (m < 3 || taus.size() != m) return peaks;
  const double c_max = *std::max_element(c.begin(), c.end());
  if (!(c_max > 0.0)) return peaks;

  for (std::size_t k = 1; k + 1 < m; ++k) {
    if (!(c[k] > c[k - 1] && c[k] > c[k + 1])) continue;
    if (c[k] < kPeakThreshold * c_max) continue;

    // Vertex of the parabola through three (x, C) samples.
    const double x0 = std::log(taus[k - 1]);
    const double x1 = std::log(taus[k]);
    const double x2 = std::log(taus[k + 1]);
    const double y0 = c[k - 1];
    const double y1 = c[k];
    const double y2 = c[k + 1];
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double a = (d12 - d01) / (x2 - x0);  // < 0 at a strict maximum
    const double b = d01 - a * (x0 + x1);
    double x_star = x1;
    double c_star = y1;
    if (a < 0.0) {
      x_star = std::clamp(-b / (2.0 * a), x0, x2);
      c_star = y1 + (x_star - x1) * (d01 + a * (x_star - x0));
    }
    peaks.push_back({std::exp(x_star), c_star});
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const ScalePeak& l, const ScalePeak& r) {
    return l.heat_capacity > r.heat_capacity;
  });
  return peaks;
}

std::vector<ScalePeak> detect_peaks(const EntropyScan& scan) {
  auto peaks = find_peaks(scan.taus, scan.heat_capacity);
  if (peaks.empty()) throw NoPeak();
  return peaks;
}

void write_scan_csv(const EntropyScan& scan, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("tau,entropy,heat_capacity\n");
  for (std::size_t k = 0; k < scan.taus.size(); ++k) {
    out.print("{:.17g},{:.17g},{:.17g}\n", scan.taus[k], scan.entropy[k], scan.heat_capacity[k]);
  }
}

void write_peaks_csv(const std::vector<ScalePeak>& peaks, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("tau_star,c_value,rank\n");
  for (std::size_t r = 0; r < peaks.size(); ++r) {
    out.print("{:.17g},{:.17g},{}\n", peaks[r].tau, peaks[r].heat_capacity, r + 1);
  }
}

}  // namespace lrg
