#include "rfrel/graph.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

#include "rfrel/parallel.hpp"
#include "rfrel/rng.hpp"
#include "rfrel/stats.hpp"

namespace rfrel {

std::string to_string(EdgeRule rule) { return rule == EdgeRule::strict ? "strict" : "inclusive"; }

EdgeRule edge_rule_from_string(const std::string& s) {
  if (s == "strict") return EdgeRule::strict;
  if (s == "inclusive") return EdgeRule::inclusive;
  throw ArgumentError("unknown edge rule '" + s + "'");
}

std::string to_string(ObservabilityMode mode) {
  return mode == ObservabilityMode::component_closure ? "component_closure" : "adjacency";
}

ObservabilityMode observability_mode_from_string(const std::string& s) {
  if (s == "component_closure") return ObservabilityMode::component_closure;
  if (s == "adjacency") return ObservabilityMode::adjacency;
  throw ArgumentError("unknown observability mode '" + s + "'");
}

ReliabilityGraph::ReliabilityGraph(int tx_id, int n, double tau, EdgeRule rule)
    : tx_id_(tx_id), n_(n), tau_(tau), rule_(rule),
      adjacency_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {
  if (n < 1) throw ArgumentError("graph needs at least one node");
}

std::size_t ReliabilityGraph::index(int x, int y) const {
  if (x < 1 || y < 1 || x > n_ || y > n_) throw ArgumentError("node index out of range");
  return static_cast<std::size_t>(x - 1) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(y - 1);
}

void ReliabilityGraph::add_edge(int x, int y) {
  if (x == y) throw ArgumentError("self-loops are not allowed");
  if (x > y) std::swap(x, y);
  if (adjacency_[index(x, y)]) return;
  adjacency_[index(x, y)] = 1;
  adjacency_[index(y, x)] = 1;
  edges_.insert(std::lower_bound(edges_.begin(), edges_.end(), std::make_pair(x, y)), {x, y});
}

bool ReliabilityGraph::has_edge(int x, int y) const { return x != y && adjacency_[index(x, y)] != 0; }

int ReliabilityGraph::degree(int x) const {
  const auto row = index(x, 1);
  return static_cast<int>(std::count(adjacency_.begin() + static_cast<std::ptrdiff_t>(row),
                                     adjacency_.begin() + static_cast<std::ptrdiff_t>(row) + n_, 1));
}

std::vector<std::pair<int, int>> ReliabilityGraph::edges() const { return edges_; }

std::vector<int> ReliabilityGraph::neighbors(int x) const {
  std::vector<int> out;
  for (int y = 1; y <= n_; ++y)
    if (has_edge(x, y)) out.push_back(y);
  return out;
}

ReliabilityGraph build_graph(const DissimilarityMatrix& matrix, double tau, EdgeRule rule) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("tau must lie in [0, 1]");
  matrix.require_complete();
  ReliabilityGraph g(matrix.tx_id(), matrix.n(), tau, rule);
  for (int x = 1; x <= matrix.n(); ++x)
    for (int y = x + 1; y <= matrix.n(); ++y)
      if (admits_edge(matrix.at(x, y), tau, rule)) g.add_edge(x, y);
  return g;
}

std::vector<std::vector<int>> Partition::members() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i) + 1);
  return out;
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

Partition clusters(const ReliabilityGraph& graph) {
  const int n = graph.n();
  DisjointSets sets(n);
  for (const auto& [x, y] : graph.edges()) sets.unite(x - 1, y - 1);
  Partition p;
  p.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> label_of_root(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    auto& l = label_of_root[static_cast<std::size_t>(sets.find(i))];
    if (l < 0) l = p.count++;
    p.labels[static_cast<std::size_t>(i)] = l;
  }
  return p;
}

std::vector<TauCount> cluster_count_vs_tau(const DissimilarityMatrix& matrix, std::span<const double> tau_grid,
                                           EdgeRule rule) {
  if (!std::is_sorted(tau_grid.begin(), tau_grid.end())) throw ArgumentError("tau grid must be ascending");
  std::vector<TauCount> out;
  for (double tau : tau_grid) out.push_back({tau, clusters(build_graph(matrix, tau, rule)).count});
  return out;
}

std::vector<TauFraction> edge_fraction_vs_tau(const DissimilarityMatrix& matrix, std::span<const double> tau_grid,
                                              EdgeRule rule) {
  if (!std::is_sorted(tau_grid.begin(), tau_grid.end())) throw ArgumentError("tau grid must be ascending");
  const auto possible = matrix.pair_count();
  std::vector<TauFraction> out;
  for (double tau : tau_grid) {
    const auto edges = build_graph(matrix, tau, rule).edge_count();
    out.push_back({tau, edges, possible, static_cast<double>(edges) / static_cast<double>(possible)});
  }
  return out;
}

std::vector<DegreePdf> degree_pdf(std::span<const DissimilarityMatrix> matrices, std::span<const double> tau_set,
                                  EdgeRule rule) {
  int max_n = 0;
  for (const auto& m : matrices) max_n = std::max(max_n, m.n());
  std::vector<DegreePdf> out;
  for (double tau : tau_set) {
    DegreePdf pdf;
    pdf.tau = tau;
    pdf.tally.assign(static_cast<std::size_t>(std::max(max_n, 1)), 0);
    for (const auto& m : matrices) {
      const auto g = build_graph(m, tau, rule);
      for (int x = 1; x <= g.n(); ++x) ++pdf.tally[static_cast<std::size_t>(g.degree(x))];
      pdf.nodes += static_cast<std::size_t>(g.n());
    }
    pdf.mass.resize(pdf.tally.size(), 0.0);
    if (pdf.nodes > 0)
      for (std::size_t d = 0; d < pdf.tally.size(); ++d)
        pdf.mass[d] = static_cast<double>(pdf.tally[d]) / static_cast<double>(pdf.nodes);
    out.push_back(std::move(pdf));
  }
  return out;
}

std::vector<TemporalRow> temporal_quantiles(std::span<const DissimilarityMatrix> matrices,
                                            std::span<const double> qs) {
  int max_n = 0;
  for (const auto& m : matrices) max_n = std::max(max_n, m.n());
  std::vector<TemporalRow> out;
  for (int d = 1; d < max_n; ++d) {
    std::vector<double> pooled;
    for (const auto& m : matrices)
      for (int x = 1; x + d <= m.n(); ++x) pooled.push_back(m.at(x, x + d));
    TemporalRow row{d, pooled.size(), {}};
    if (!pooled.empty()) row.quantiles = quantiles(std::move(pooled), qs);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<int>> subsets_for_size(int n, int k, const SubsetSampler& sampler, bool& exact) {
  if (k < 1 || k > n) throw ArgumentError("subset size must lie in [1, n]");
  std::vector<std::vector<int>> out;
  exact = binomial_exact(n, k) <= sampler.enumeration_budget;
  if (exact) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 1);
    while (true) {
      out.push_back(idx);
      int i = k - 1;
      while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i + 1) --i;
      if (i < 0) break;
      ++idx[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
  }
  auto rng = make_rng(sampler.seed, Stream::subsets, {static_cast<std::uint64_t>(n)});
  std::vector<int> perm(static_cast<std::size_t>(n));
  out.reserve(sampler.samples);
  for (std::size_t s = 0; s < sampler.samples; ++s) {
    std::iota(perm.begin(), perm.end(), 1);
    // Partial Fisher-Yates: only the first k positions are needed.
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    // Finish the permutation so every size consumes the same stream.
    for (int i = k; i < n - 1; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> subset(perm.begin(), perm.begin() + k);
    std::sort(subset.begin(), subset.end());
    out.push_back(std::move(subset));
  }
  return out;
}

SubsetRatio fully_connected_ratio(const ReliabilityGraph& graph, int k, const SubsetSampler& sampler) {
  const int n = graph.n();
  if (k < 2) throw ArgumentError("k must be >= 2");
  if (k > n) throw ArgumentError("k = " + std::to_string(k) + " exceeds node count " + std::to_string(n));
  SubsetRatio r;
  r.k = k;
  r.subsets = binomial_exact(n, k);
  const auto subsets = subsets_for_size(n, k, sampler, r.exact);
  r.examined = subsets.size();
  for (const auto& s : subsets) {
    bool complete = true;
    for (std::size_t i = 0; i < s.size() && complete; ++i)
      for (std::size_t j = i + 1; j < s.size() && complete; ++j) complete = graph.has_edge(s[i], s[j]);
    r.complete += complete;
  }
  r.ratio = static_cast<double>(r.complete) / static_cast<double>(r.examined);
  return r;
}

SubsetRatio fully_connected_ratio(const DissimilarityMatrix& matrix, double tau, int k, EdgeRule rule,
                                  const SubsetSampler& sampler) {
  return fully_connected_ratio(build_graph(matrix, tau, rule), k, sampler);
}

namespace {

// Precomputed view of a graph for repeated coverage queries.
class CoverageOracle {
 public:
  CoverageOracle(const ReliabilityGraph& graph, ObservabilityMode mode) : graph_(graph), mode_(mode) {
    if (mode == ObservabilityMode::component_closure) {
      const auto p = clusters(graph);
      labels_ = p.labels;
      sizes_.assign(static_cast<std::size_t>(p.count), 0);
      for (int l : labels_) ++sizes_[static_cast<std::size_t>(l)];
    }
  }

  double operator()(std::span<const int> subset) const {
    const int n = graph_.n();
    std::vector<char> mark;
    int covered = 0;
    if (mode_ == ObservabilityMode::component_closure) {
      mark.assign(sizes_.size(), 0);
      for (int x : subset) {
        const auto l = static_cast<std::size_t>(labels_[static_cast<std::size_t>(x - 1)]);
        if (!mark[l]) {
          mark[l] = 1;
          covered += sizes_[l];
        }
      }
    } else {
      mark.assign(static_cast<std::size_t>(n), 0);
      for (int x : subset) {
        mark[static_cast<std::size_t>(x - 1)] = 1;
        for (int y = 1; y <= n; ++y)
          if (graph_.has_edge(x, y)) mark[static_cast<std::size_t>(y - 1)] = 1;
      }
      covered = static_cast<int>(std::count(mark.begin(), mark.end(), 1));
    }
    return static_cast<double>(covered) / static_cast<double>(n);
  }

 private:
  const ReliabilityGraph& graph_;
  ObservabilityMode mode_;
  std::vector<int> labels_;
  std::vector<int> sizes_;
};

std::vector<double> evaluate_coverage(const CoverageOracle& oracle, const std::vector<std::vector<int>>& subsets,
                                      int threads) {
  std::vector<double> values(subsets.size());
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::size_t i = 0; i < subsets.size(); ++i) values[i] = oracle(subsets[i]);
  return values;
}

std::vector<ObservabilityRow> curve(const ReliabilityGraph& graph, ObservabilityMode mode,
                                    const SubsetSampler& sampler, std::span<const double> qs, int threads) {
  const CoverageOracle oracle(graph, mode);
  std::vector<ObservabilityRow> rows;
  for (int k = 1; k <= graph.n(); ++k) {
    ObservabilityRow row;
    row.subset_size = k;
    const auto subsets = subsets_for_size(graph.n(), k, sampler, row.exact);
    row.subsets = subsets.size();
    row.quantiles = quantiles(evaluate_coverage(oracle, subsets, threads), qs);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

double coverage(const ReliabilityGraph& graph, std::span<const int> subset, ObservabilityMode mode) {
  for (int x : subset)
    if (x < 1 || x > graph.n()) throw ArgumentError("subset node out of range");
  return CoverageOracle(graph, mode)(subset);
}

std::vector<double> coverage_values(const ReliabilityGraph& graph, int k, ObservabilityMode mode,
                                    const SubsetSampler& sampler, bool& exact, int workers) {
  const auto subsets = subsets_for_size(graph.n(), k, sampler, exact);
  return evaluate_coverage(CoverageOracle(graph, mode), subsets, resolve_workers(workers));
}

std::vector<ObservabilityRow> observability_curve(const ReliabilityGraph& graph, ObservabilityMode mode,
                                                  const SubsetSampler& sampler, std::span<const double> qs,
                                                  int workers) {
  return curve(graph, mode, sampler, qs, resolve_workers(workers));
}

std::vector<ObservabilityRow> observability_curve_serial(const ReliabilityGraph& graph, ObservabilityMode mode,
                                                         const SubsetSampler& sampler, std::span<const double> qs) {
  return curve(graph, mode, sampler, qs, 1);
}

int min_subset_for_coverage(std::span<const ObservabilityRow> curve, double p, std::size_t level) {
  for (const auto& row : curve)
    if (level < row.quantiles.size() && row.quantiles[level] >= p) return row.subset_size;
  return 0;
}

RegionDecomposition region_decomposition(std::span<const DissimilarityMatrix> matrices, double eps_hi,
                                         double eps_lo) {
  if (!(eps_hi >= 0.0 && eps_hi < 0.25) || !(eps_lo >= 0.0 && eps_lo < 0.25))
    throw ArgumentError("region tolerances must lie in [0, 0.25)");
  RegionDecomposition r;
  r.eps_hi = eps_hi;
  r.eps_lo = eps_lo;
  for (const auto& m : matrices) {
    m.require_complete();
    const auto v = m.values();
    r.sorted_delta.insert(r.sorted_delta.end(), v.begin(), v.end());
  }
  std::sort(r.sorted_delta.begin(), r.sorted_delta.end(), std::greater<>());
  for (double d : r.sorted_delta) {
    if (d >= 1.0 - eps_hi) ++r.r1_count;
    else if (d <= 0.5 + eps_lo) ++r.r3_count;
    else ++r.r2_count;
  }
  return r;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ArgumentError("labelings differ in length");
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto pairs = [](double c) { return c * (c - 1) / 2; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [_, c] : cells) index += pairs(c);
  for (const auto& [_, c] : rows) sum_rows += pairs(c);
  for (const auto& [_, c] : cols) sum_cols += pairs(c);
  const double expected = sum_rows * sum_cols / pairs(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return index == expected ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

void write_edge_list(const ReliabilityGraph& graph, const DissimilarityMatrix& matrix, std::ostream& out) {
  out << "x,y,delta\n";
  for (const auto& [x, y] : graph.edges()) out << x << ',' << y << ',' << matrix.at(x, y) << '\n';
}

void write_dot(const ReliabilityGraph& graph, const DissimilarityMatrix& matrix, std::ostream& out) {
  out << "graph tx" << graph.tx_id() << " {\n";
  out << "  // tau=" << graph.tau() << " rule=" << to_string(graph.rule()) << '\n';
  for (int x = 1; x <= graph.n(); ++x) out << "  " << x << ";\n";
  for (const auto& [x, y] : graph.edges())
    out << "  " << x << " -- " << y << " [delta=" << matrix.at(x, y) << "];\n";
  out << "}\n";
}

}  // namespace rfrel
