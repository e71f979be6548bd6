#pragma once

#include "locle/common.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace locle {

/// Undirected edge stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Makes (a, b) canonical: endpoints ordered ascending.
inline Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

/// Undirected attributed-graph topology with optional nonnegative edge
/// weights. Edges are kept sorted by (u, v) and mirrored into a CSR neighbor
/// index, so iteration order is deterministic everywhere.
class Graph {
 public:
  Graph() = default;

  /// Validates and canonicalizes the edge list. Throws ValidationError on
  /// self-loops, duplicate edges, endpoints outside [0, n), or invalid
  /// weights. `weights`, when nonempty, must align with `edges`.
  Graph(int num_nodes, std::vector<std::pair<int, int>> edges,
        std::vector<double> weights = {});

  int num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  bool weighted() const { return !weights_.empty(); }

  const std::vector<Edge>& edges() const { return edges_; }

  /// Weight of edge index `e`; 1 for unweighted graphs.
  double edge_weight(std::size_t e) const {
    return weights_.empty() ? 1.0 : weights_[e];
  }

  /// Neighbor ids of `v` in ascending order.
  std::span<const int> neighbors(int v) const {
    return {adj_.data() + offsets_[v], adj_.data() + offsets_[v + 1]};
  }

  /// Edge indices aligned with neighbors(v).
  std::span<const std::size_t> incident_edges(int v) const {
    return {adj_edge_.data() + offsets_[v], adj_edge_.data() + offsets_[v + 1]};
  }

  int neighbor_count(int v) const { return offsets_[v + 1] - offsets_[v]; }

  /// Weighted degree (neighbor count when unweighted).
  double degree(int v) const;

  bool has_edge(int a, int b) const;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
  std::vector<int> offsets_;
  std::vector<int> adj_;
  std::vector<std::size_t> adj_edge_;
};

/// Entry i = sum of weights of edges incident to i.
Vector degree_vector(const Graph& g);

/// A_hat = D^{-1/2} A D^{-1/2}. Zero-degree nodes get all-zero rows and
/// columns. With `add_self_loops`, A and D are those of the self-looped
/// graph (GCN renormalization); analytic callers leave the flag off.
SparseMatrix normalized_adjacency(const Graph& g, bool add_self_loops = false);

/// L_hat = I - A_hat (no self-loops).
SparseMatrix normalized_laplacian(const Graph& g);

/// Tr(Y^T L_hat Y) with zero-degree rows contributing nothing; equals the
/// edge sum of w_ij * ||Y_i/sqrt(d_i) - Y_j/sqrt(d_j)||^2.
double dirichlet_energy(const Graph& g, const Eigen::Ref<const Matrix>& y);

}  // namespace locle
