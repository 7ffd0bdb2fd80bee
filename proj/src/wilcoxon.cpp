#include "lrg/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "lrg/errors.hpp"

namespace lrg {

std::string_view to_string(Alternative alt) { return alt == Alternative::Greater ? "greater" : "less"; }

Alternative parse_alternative(std::string_view text) {
  if (text == "greater") return Alternative::Greater;
  if (text == "less") return Alternative::Less;
  throw InvalidConfig("alternative must be 'greater' or 'less', got '" + std::string(text) + "'");
}

namespace {

double upper_normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alt,
                                    WilcoxonMethod method) {
  if (a.size() != b.size()) {
    throw DimMismatch("paired samples differ in length (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }

  WilcoxonResult r;
  r.alternative = alt;
  r.n_effective = static_cast<int>(d.size());
  if (d.empty()) {
    r.all_zero = true;
    return r;
  }

  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });

  // Doubled mid-ranks are integers: a tie group at sorted positions [s, e]
  // gets rank (s + e + 2) / 2.
  std::vector<long long> rank2(n);
  double tie_term = 0.0;
  long long step2 = 0;
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    while (e + 1 < n && std::abs(d[order[e + 1]]) == std::abs(d[order[s]])) ++e;
    const auto r2 = static_cast<long long>(s + e + 2);
    for (std::size_t k = s; k <= e; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(e - s + 1);
    tie_term += t * t * t - t;
    step2 = std::gcd(step2, r2);
    s = e + 1;
  }

  long long w2 = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w2 += rank2[i];
  r.statistic = static_cast<double>(w2) / 2.0;

  const bool exact =
      method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && r.n_effective <= kWilcoxonExactLimit);
  r.exact = exact;

  if (exact) {
    // Count sign patterns by doubled W+; every pattern has probability 2^-n.
    const long long total2 = std::accumulate(rank2.begin(), rank2.end(), 0LL);
    std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    long long reach = 0;
    for (long long r2 : rank2) {
      for (long long s = reach; s >= 0; --s) {
        if (count[s] != 0.0) count[s + r2] += count[s];
      }
      reach += r2;
    }
    double tail = 0.0;
    if (alt == Alternative::Greater) {
      for (long long s = w2; s <= total2; ++s) tail += count[s];
    } else {
      for (long long s = 0; s <= w2; ++s) tail += count[s];
    }
    r.p_value = std::clamp(std::ldexp(tail, -static_cast<int>(n)), 0.0, 1.0);
    return r;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double sd = std::sqrt(var);
  const double correction = static_cast<double>(step2) / 4.0;  // half of step2 / 2
  const double w = r.statistic;
  const double p = alt == Alternative::Greater ? upper_normal_tail((w - mean - correction) / sd)
                                               : upper_normal_tail((mean - w - correction) / sd);
  r.p_value = std::clamp(p, 0.0, 1.0);
  return r;
}

}  // namespace lrg
