#pragma once

#include "locle/graph.hpp"

namespace locle {

/// Truncated feature propagation
///   H = sum_{t=0}^{T} c_t * A_hat^t * X
/// computed with T sparse matrix products, never materializing A_hat^t.
/// Coefficients: c_t = (1 - alpha) * alpha^t when alpha < 1, and c_t =
/// alpha^t when alpha >= 1 (the damping factor vanishes at alpha = 1, so the
/// undamped sum is used there).
Matrix propagate_features(const Graph& g, const Matrix& x, int t_hops,
                          double alpha);

}  // namespace locle
