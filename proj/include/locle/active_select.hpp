#pragma once

#include "locle/graph.hpp"

#include <cstdint>
#include <vector>

namespace locle {

/// Stage-I output: cluster center nodes plus the highest-closeness members,
/// `members.size()` equal to the initial annotation budget. Centers come
/// first in `members`; `scores` aligns with `members`.
struct ActiveSelection {
  std::vector<int> centers;
  std::vector<int> members;
  std::vector<double> scores;
};

struct ActiveSelectConfig {
  int t_hops = 2;
  double alpha = 1.0;
  int tau = 128;
  int clusters = 0;  // K; must be set by the caller
  int budget = 0;    // B_ini
  std::uint64_t seed = 0;
  /// Decompose the raw features instead of the propagated ones.
  bool decompose_raw_features = false;
};

/// Left singular vectors of `h` for the tau dominant singular values, as an
/// n x tau matrix with orthonormal columns. Randomized subspace iteration
/// seeded by `seed`; falls back to a dense SVD when tau is close to the full
/// rank. Column signs are fixed by making each column's largest-magnitude
/// entry positive.
Matrix truncated_left_singular_vectors(const Matrix& h, int tau,
                                       std::uint64_t seed);

struct KMeansResult {
  std::vector<int> assignments;   // cluster id per row of U
  std::vector<int> center_nodes;  // distinct node nearest each centroid
};

/// Lloyd's algorithm from k-means++ seeding, run to an assignment fixpoint
/// or `max_iter` sweeps. Ties in assignment and center extraction break
/// toward the smaller id. `sse_history`, when given, receives the
/// within-cluster SSE after every assignment step.
KMeansResult kmeans(const Matrix& u, int k_clusters, std::uint64_t seed,
                    int max_iter = 300, std::vector<double>* sse_history = nullptr);

/// 1 / (1 + ||U_i - U_center||_2), in (0, 1].
double closeness_score(const Matrix& u, int i, int center_node);

/// Full Stage-I selection: propagate, decompose, cluster, then rank
/// non-center nodes globally by closeness to their own cluster's center.
ActiveSelection select_active_nodes(const Graph& g, const Matrix& x,
                                    const ActiveSelectConfig& cfg);

}  // namespace locle
