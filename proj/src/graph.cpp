#include "locle/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace locle {

Graph::Graph(int num_nodes, std::vector<std::pair<int, int>> edges,
             std::vector<double> weights)
    : n_(num_nodes) {
  if (num_nodes < 0) throw ValidationError("negative node count");
  if (!weights.empty() && weights.size() != edges.size()) {
    throw ValidationError("weight list does not align with edge list");
  }

  edges_.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    if (a == b) {
      throw ValidationError("self-loop at node " + std::to_string(a));
    }
    if (a < 0 || b < 0 || a >= n_ || b >= n_) {
      throw ValidationError("edge endpoint out of range: (" +
                            std::to_string(a) + "," + std::to_string(b) + ")");
    }
    edges_.push_back(make_edge(a, b));
  }

  // Sort edges by (u, v) and carry weights along.
  std::vector<std::size_t> order(edges_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return edges_[x] < edges_[y];
  });
  std::vector<Edge> sorted;
  sorted.reserve(edges_.size());
  std::vector<double> sorted_w;
  if (!weights.empty()) sorted_w.reserve(weights.size());
  for (std::size_t idx : order) {
    sorted.push_back(edges_[idx]);
    if (!weights.empty()) {
      const double w = weights[idx];
      if (!std::isfinite(w) || w < 0.0) {
        throw ValidationError("edge weight must be finite and >= 0");
      }
      sorted_w.push_back(w);
    }
  }
  edges_ = std::move(sorted);
  weights_ = std::move(sorted_w);

  for (std::size_t e = 1; e < edges_.size(); ++e) {
    if (edges_[e] == edges_[e - 1]) {
      throw ValidationError("duplicate edge (" + std::to_string(edges_[e].u) +
                            "," + std::to_string(edges_[e].v) + ")");
    }
  }

  // CSR over both directions.
  offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (const Edge& e : edges_) {
    ++offsets_[e.u + 1];
    ++offsets_[e.v + 1];
  }
  for (int v = 0; v < n_; ++v) offsets_[v + 1] += offsets_[v];
  adj_.resize(2 * edges_.size());
  adj_edge_.resize(2 * edges_.size());
  std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& ed = edges_[e];
    adj_[cursor[ed.u]] = ed.v;
    adj_edge_[cursor[ed.u]++] = e;
    adj_[cursor[ed.v]] = ed.u;
    adj_edge_[cursor[ed.v]++] = e;
  }
  // Neighbor lists come out sorted because edges are visited in (u, v) order
  // and every list receives ids in increasing order per direction; merge the
  // two directions by an explicit sort keyed on the neighbor id.
  for (int v = 0; v < n_; ++v) {
    const int lo = offsets_[v];
    const int hi = offsets_[v + 1];
    std::vector<std::pair<int, std::size_t>> tmp;
    tmp.reserve(hi - lo);
    for (int s = lo; s < hi; ++s) tmp.emplace_back(adj_[s], adj_edge_[s]);
    std::sort(tmp.begin(), tmp.end());
    for (int s = lo; s < hi; ++s) {
      adj_[s] = tmp[s - lo].first;
      adj_edge_[s] = tmp[s - lo].second;
    }
  }
}

double Graph::degree(int v) const {
  if (!weighted()) return static_cast<double>(neighbor_count(v));
  double d = 0.0;
  for (std::size_t e : incident_edges(v)) d += weights_[e];
  return d;
}

bool Graph::has_edge(int a, int b) const {
  if (a < 0 || b < 0 || a >= n_ || b >= n_ || a == b) return false;
  const auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

Vector degree_vector(const Graph& g) {
  Vector d(g.num_nodes());
  for (int v = 0; v < g.num_nodes(); ++v) d[v] = g.degree(v);
  return d;
}

namespace {

Vector inv_sqrt_degrees(const Vector& d) {
  Vector out(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
  }
  return out;
}

}  // namespace

SparseMatrix normalized_adjacency(const Graph& g, bool add_self_loops) {
  const int n = g.num_nodes();
  Vector d = degree_vector(g);
  if (add_self_loops) d.array() += 1.0;
  const Vector dinv = inv_sqrt_degrees(d);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * g.num_edges() + (add_self_loops ? n : 0));
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edges()[e];
    const double v = g.edge_weight(e) * dinv[ed.u] * dinv[ed.v];
    trips.emplace_back(ed.u, ed.v, v);
    trips.emplace_back(ed.v, ed.u, v);
  }
  if (add_self_loops) {
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, dinv[i] * dinv[i]);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();
  return a;
}

SparseMatrix normalized_laplacian(const Graph& g) {
  const int n = g.num_nodes();
  SparseMatrix l = -normalized_adjacency(g, false);
  SparseMatrix eye(n, n);
  eye.setIdentity();
  l += eye;
  l.makeCompressed();
  return l;
}

double dirichlet_energy(const Graph& g, const Eigen::Ref<const Matrix>& y) {
  if (y.rows() != g.num_nodes()) {
    throw ValidationError("dirichlet_energy: row count does not match graph");
  }
  // Tr(Y^T D^{-1/2} (D - W) D^{-1/2} Y), accumulated as the edge sum of
  // squared differences so the result is nonnegative by construction.
  // Zero-degree rows drop out entirely.
  const Vector d = degree_vector(g);
  const Vector dinv = inv_sqrt_degrees(d);
  double energy = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edges()[e];
    energy += g.edge_weight(e) *
              (y.row(ed.u) * dinv[ed.u] - y.row(ed.v) * dinv[ed.v]).squaredNorm();
  }
  return energy;
}

}  // namespace locle
