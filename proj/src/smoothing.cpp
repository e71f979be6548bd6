#include "locle/smoothing.hpp"

namespace locle {

Matrix propagate_features(const Graph& g, const Matrix& x, int t_hops,
                          double alpha) {
  if (x.rows() != g.num_nodes()) {
    throw ValidationError("propagate_features: feature rows != node count");
  }
  if (t_hops < 0) throw ValidationError("propagate_features: T must be >= 0");
  if (alpha <= 0.0) throw ValidationError("propagate_features: alpha must be > 0");

  const SparseMatrix a_hat = normalized_adjacency(g, false);
  const double damping = alpha < 1.0 ? (1.0 - alpha) : 1.0;

  Matrix power = x;
  Matrix h = damping * x;
  double coeff = damping;
  for (int t = 1; t <= t_hops; ++t) {
    power = a_hat * power;
    coeff *= alpha;
    h += coeff * power;
  }
  return h;
}

}  // namespace locle
