#include "rfrel/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rfrel/error.hpp"

namespace rfrel {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ArgumentError("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile level outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> quantiles(std::vector<double> values, std::span<const double> qs) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) out.push_back(quantile_sorted(values, q));
  return out;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

std::uint64_t binomial_exact(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  // r * (n-k+i) is always divisible by i; overflow saturates.
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    std::uint64_t next = 0;
    if (__builtin_mul_overflow(r, static_cast<std::uint64_t>(n - k + i), &next))
      return std::numeric_limits<std::uint64_t>::max();
    r = next / static_cast<std::uint64_t>(i);
  }
  return r;
}

}  // namespace rfrel
