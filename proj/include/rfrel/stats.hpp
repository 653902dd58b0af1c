#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rfrel {

/// Linear-interpolation quantile (Hyndman-Fan type 7) of an ascending
/// sorted sample. q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

/// Sorts a copy and evaluates each requested quantile.
std::vector<double> quantiles(std::vector<double> values, std::span<const double> qs);

/// C(n, k) in floating point; exact for the sizes the analytics use.
double binomial(int n, int k);

/// C(n, k) exactly; saturates at UINT64_MAX.
std::uint64_t binomial_exact(int n, int k);

}  // namespace rfrel
