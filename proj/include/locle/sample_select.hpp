#pragma once

#include "locle/graph.hpp"

#include <vector>

namespace locle {

/// Shannon entropy in nats of row `node` of the ensemble prediction, with a
/// small additive guard inside the log.
double label_entropy(const Eigen::Ref<const PredictionMatrix>& ybar, int node,
                     double sigma = 1e-9);

/// Euclidean gap between a node's class distribution and the mean of its
/// neighbors' distributions; 0 for isolated nodes.
double label_disharmonicity(const Graph& g,
                            const Eigen::Ref<const PredictionMatrix>& ybar,
                            int node);

struct SelectionResult {
  std::vector<int> certain;
  std::vector<int> uncertain;
  /// Scores aligned with the candidate pool handed to select_informative.
  std::vector<double> entropy;
  std::vector<double> disharmonicity;
  /// Set when the pool was too small to fill a quota.
  bool truncated = false;
};

/// Builds the most-certain and most-uncertain sets over `pool`. The certain
/// set intersects the quota-sized lowest-disharmonicity and lowest-entropy
/// top lists, then tops up half-and-half from each list's remainder (ceil to
/// the disharmonicity side). The uncertain set does the same with orderings
/// reversed, drawing from the pool minus the certain set so the two never
/// collide. All ties break toward the smaller node id.
SelectionResult select_informative(const Graph& g, const PredictionMatrix& ybar,
                                   const std::vector<int>& pool,
                                   int quota_certain, int quota_uncertain);

/// Same set algebra on precomputed score tables (`le`/`lh` aligned with
/// `pool`).
SelectionResult select_informative_scores(const std::vector<int>& pool,
                                          const std::vector<double>& le,
                                          const std::vector<double>& lh,
                                          int quota_certain, int quota_uncertain);

}  // namespace locle
