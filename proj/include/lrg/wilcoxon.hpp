#pragma once

#include <span>
#include <string_view>

namespace lrg {

enum class Alternative { Greater, Less };

std::string_view to_string(Alternative alt);
Alternative parse_alternative(std::string_view text);  // "greater" | "less"

enum class WilcoxonMethod { Auto, Exact, Normal };

/// Largest number of nonzero differences handled by exact enumeration under
/// WilcoxonMethod::Auto.
inline constexpr int kWilcoxonExactLimit = 15;

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of mid-ranks of positive differences
  double p_value = 1.0;
  Alternative alternative = Alternative::Greater;
  int n_effective = 0;     // nonzero paired differences
  bool exact = false;
  bool all_zero = false;   // every pair tied; p is 1 by convention
};

/// One-sided paired signed-rank test of a against b. Zero differences are
/// dropped and tied |d| share mid-ranks. The exact null distribution of W+ is
/// enumerated for n_effective <= kWilcoxonExactLimit; above that a normal
/// approximation with tie-corrected variance is used, with a continuity
/// correction of half the lattice step of W+ (1/2 without ties).
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alt,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

}  // namespace lrg
