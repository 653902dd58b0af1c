#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. Deliberately naive: linear scans, BFS, full loops.

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <span>
#include <vector>

#include "rfrel/graph.hpp"
#include "rfrel/imaging.hpp"

namespace rfrel::oracle {

/// Scans every bin edge of each axis for each sample.
inline std::vector<std::uint32_t> bin(std::span<const Sample> seg, const Extent& e) {
  auto locate = [](double v, double lo, double hi) {
    for (int k = 0; k < kTileGrid; ++k) {
      const double left = lo + (hi - lo) * k / kTileGrid;
      const bool last = k == kTileGrid - 1;
      const double right = last ? hi : lo + (hi - lo) * (k + 1) / kTileGrid;
      if (v >= left && (last ? v <= right : v < right)) return k;
    }
    return -1;
  };
  std::vector<std::uint32_t> grid(kTileGrid * kTileGrid, 0);
  for (const auto& s : seg) {
    const int c = locate(s.real(), e.i_min, e.i_max);
    const int q = locate(s.imag(), e.q_min, e.q_max);
    if (c < 0 || q < 0) continue;
    ++grid[static_cast<std::size_t>((kTileGrid - 1 - q) * kTileGrid + c)];
  }
  return grid;
}

/// Component labels by BFS from nodes in ascending order.
inline std::vector<int> components(const ReliabilityGraph& g) {
  const int n = g.n();
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int s = 1; s <= n; ++s) {
    if (label[static_cast<std::size_t>(s - 1)] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    label[static_cast<std::size_t>(s - 1)] = next;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v = 1; v <= n; ++v)
        if (v != u && g.has_edge(u, v) && label[static_cast<std::size_t>(v - 1)] < 0) {
          label[static_cast<std::size_t>(v - 1)] = next;
          q.push(v);
        }
    }
    ++next;
  }
  return label;
}

inline int degree(const DissimilarityMatrix& m, int x, double tau) {
  int d = 0;
  for (int y = 1; y <= m.n(); ++y) d += y != x && m.at(x, y) < tau;
  return d;
}

inline std::size_t edge_count(const DissimilarityMatrix& m, double tau) {
  std::size_t count = 0;
  for (int x = 1; x <= m.n(); ++x)
    for (int y = x + 1; y <= m.n(); ++y) count += m.at(x, y) < tau;
  return count;
}

/// Complete k-subsets for k = 2, 3, 4 by nested loops.
inline std::size_t cliques(const ReliabilityGraph& g, int k) {
  const int n = g.n();
  std::size_t count = 0;
  for (int a = 1; a <= n; ++a)
    for (int b = a + 1; b <= n; ++b) {
      if (k == 2) {
        count += g.has_edge(a, b);
        continue;
      }
      for (int c = b + 1; c <= n; ++c) {
        if (k == 3) {
          count += g.has_edge(a, b) && g.has_edge(a, c) && g.has_edge(b, c);
          continue;
        }
        for (int d = c + 1; d <= n; ++d)
          count += g.has_edge(a, b) && g.has_edge(a, c) && g.has_edge(a, d) && g.has_edge(b, c) &&
                   g.has_edge(b, d) && g.has_edge(c, d);
      }
    }
  return count;
}

inline std::set<int> closure(const ReliabilityGraph& g, std::span<const int> s, ObservabilityMode mode) {
  std::set<int> out(s.begin(), s.end());
  if (mode == ObservabilityMode::adjacency) {
    for (int x : s)
      for (int y = 1; y <= g.n(); ++y)
        if (y != x && g.has_edge(x, y)) out.insert(y);
    return out;
  }
  const auto label = components(g);
  for (int y = 1; y <= g.n(); ++y)
    for (int x : s)
      if (label[static_cast<std::size_t>(x - 1)] == label[static_cast<std::size_t>(y - 1)]) out.insert(y);
  return out;
}

/// Linear-interpolation quantile on a copy.
inline double type7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Hubert-Arabie ARI from raw pair agreements.
inline double ari(std::span<const int> a, std::span<const int> b) {
  double same_both = 0, same_a = 0, same_b = 0, diff_both = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      if (sa && sb) ++same_both;
      else if (sa) ++same_a;
      else if (sb) ++same_b;
      else ++diff_both;
    }
  const double den = (same_both + same_a) * (same_a + diff_both) + (same_both + same_b) * (same_b + diff_both);
  if (den == 0) return 1.0;
  return 2 * (same_both * diff_both - same_a * same_b) / den;
}

}  // namespace rfrel::oracle
