#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfrel/matrix.hpp"

namespace rfrel {

enum class EdgeRule { strict, inclusive };

std::string to_string(EdgeRule rule);
EdgeRule edge_rule_from_string(const std::string& s);

/// strict: delta < tau; inclusive: delta <= tau.
inline bool admits_edge(double delta, double tau, EdgeRule rule) {
  return rule == EdgeRule::strict ? delta < tau : delta <= tau;
}

/// Undirected graph on measurements 1..n, adjacency matrix storage.
class ReliabilityGraph {
 public:
  ReliabilityGraph(int tx_id, int n, double tau, EdgeRule rule);

  int tx_id() const noexcept { return tx_id_; }
  int n() const noexcept { return n_; }
  double tau() const noexcept { return tau_; }
  EdgeRule rule() const noexcept { return rule_; }

  void add_edge(int x, int y);
  bool has_edge(int x, int y) const;
  int degree(int x) const;
  std::size_t edge_count() const noexcept { return edges_.size(); }
  /// Edges (x, y), x < y, in lexicographic order.
  std::vector<std::pair<int, int>> edges() const;
  /// Neighbors of x in ascending order.
  std::vector<int> neighbors(int x) const;

 private:
  std::size_t index(int x, int y) const;

  int tx_id_;
  int n_;
  double tau_;
  EdgeRule rule_;
  std::vector<std::uint8_t> adjacency_;
  std::vector<std::pair<int, int>> edges_;
};

/// Edge exactly where the rule admits delta(x, y). Throws
/// IncompleteMatrixError listing missing pairs.
ReliabilityGraph build_graph(const DissimilarityMatrix& matrix, double tau, EdgeRule rule = EdgeRule::strict);

/// Connected components. labels[i] is the component of node i + 1;
/// components are numbered by their smallest node.
struct Partition {
  std::vector<int> labels;
  int count = 0;

  std::vector<std::vector<int>> members() const;
};

Partition clusters(const ReliabilityGraph& graph);

struct TauCount {
  double tau = 0.0;
  int clusters = 0;
};

std::vector<TauCount> cluster_count_vs_tau(const DissimilarityMatrix& matrix, std::span<const double> tau_grid,
                                           EdgeRule rule = EdgeRule::strict);

struct TauFraction {
  double tau = 0.0;
  std::size_t edges = 0;
  std::size_t possible = 0;  // C(n, 2)
  double fraction = 0.0;
};

std::vector<TauFraction> edge_fraction_vs_tau(const DissimilarityMatrix& matrix, std::span<const double> tau_grid,
                                              EdgeRule rule = EdgeRule::strict);

/// Degree distribution pooled over all matrices for one tau.
struct DegreePdf {
  double tau = 0.0;
  std::size_t nodes = 0;
  std::vector<std::size_t> tally;  // tally[d] = nodes with degree d
  std::vector<double> mass;        // tally / nodes
};

std::vector<DegreePdf> degree_pdf(std::span<const DissimilarityMatrix> matrices, std::span<const double> tau_set,
                                  EdgeRule rule = EdgeRule::strict);

/// Deltas pooled by temporal distance d = y - x across matrices.
struct TemporalRow {
  int distance = 0;
  std::size_t pairs = 0;
  std::vector<double> quantiles;
};

inline constexpr double kDefaultQuantiles[] = {0.05, 0.5, 0.95};

std::vector<TemporalRow> temporal_quantiles(std::span<const DissimilarityMatrix> matrices,
                                            std::span<const double> qs = kDefaultQuantiles);

/// Exact enumeration up to enumeration_budget subsets, otherwise `samples`
/// uniform draws from a generator seeded with `seed` and the subset size.
struct SubsetSampler {
  std::uint64_t enumeration_budget = 100000;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
};

struct SubsetRatio {
  int k = 0;
  std::uint64_t subsets = 0;  // C(n, k)
  std::size_t examined = 0;
  std::size_t complete = 0;
  double ratio = 0.0;
  bool exact = true;
};

/// Fraction of the k-node subsets inducing a complete subgraph.
SubsetRatio fully_connected_ratio(const ReliabilityGraph& graph, int k, const SubsetSampler& sampler = {});
SubsetRatio fully_connected_ratio(const DissimilarityMatrix& matrix, double tau, int k,
                                  EdgeRule rule = EdgeRule::strict, const SubsetSampler& sampler = {});

enum class ObservabilityMode { component_closure, adjacency };

std::string to_string(ObservabilityMode mode);
ObservabilityMode observability_mode_from_string(const std::string& s);

/// |closure(S)| / n for a set of 1-based nodes.
double coverage(const ReliabilityGraph& graph, std::span<const int> subset, ObservabilityMode mode);

/// Every k-subset in lexicographic order when C(n, k) fits the budget,
/// otherwise the first k entries of `samples` seeded random permutations.
/// Prefix sampling makes sampled coverage monotone in k for a fixed seed.
std::vector<std::vector<int>> subsets_for_size(int n, int k, const SubsetSampler& sampler, bool& exact);

struct ObservabilityRow {
  int subset_size = 0;
  std::size_t subsets = 0;
  bool exact = true;
  std::vector<double> quantiles;
};

/// Coverage quantiles per subset size 1..n. Coverage is evaluated in
/// parallel; subsets are drawn serially so the result is thread-count
/// independent.
std::vector<ObservabilityRow> observability_curve(const ReliabilityGraph& graph, ObservabilityMode mode,
                                                  const SubsetSampler& sampler = {},
                                                  std::span<const double> qs = kDefaultQuantiles, int workers = 0);
std::vector<ObservabilityRow> observability_curve_serial(const ReliabilityGraph& graph, ObservabilityMode mode,
                                                         const SubsetSampler& sampler = {},
                                                         std::span<const double> qs = kDefaultQuantiles);

/// Raw coverage values of one subset size (the sample behind a row).
std::vector<double> coverage_values(const ReliabilityGraph& graph, int k, ObservabilityMode mode,
                                    const SubsetSampler& sampler, bool& exact, int workers = 0);

/// Smallest subset size whose quantile at `level` (by index into the
/// row quantiles) reaches p; 0 if none does.
int min_subset_for_coverage(std::span<const ObservabilityRow> curve, double p, std::size_t level = 1);

struct RegionDecomposition {
  std::size_t r1_count = 0;
  std::size_t r2_count = 0;
  std::size_t r3_count = 0;
  double eps_hi = 0.0;
  double eps_lo = 0.0;
  std::vector<double> sorted_delta;  // descending

  std::size_t total() const noexcept { return r1_count + r2_count + r3_count; }
};

/// R1: delta >= 1 - eps_hi; R3: delta <= 0.5 + eps_lo; R2: the rest.
RegionDecomposition region_decomposition(std::span<const DissimilarityMatrix> matrices, double eps_hi = 0.0,
                                         double eps_lo = 0.0);

/// Adjusted Rand index between two labelings of the same items. Two
/// identical trivial partitions score 1.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// "x,y,delta" lines with a header.
void write_edge_list(const ReliabilityGraph& graph, const DissimilarityMatrix& matrix, std::ostream& out);
/// Graphviz DOT, one node per line then one edge per line.
void write_dot(const ReliabilityGraph& graph, const DissimilarityMatrix& matrix, std::ostream& out);

}  // namespace rfrel
