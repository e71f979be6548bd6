#include "locle/active_select.hpp"

#include "locle/rng.hpp"
#include "locle/smoothing.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace locle {

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

void fix_column_signs(Matrix& u) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) u.col(j) = -u.col(j);
  }
}

Matrix thin_q(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  Matrix q = qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
  return q;
}

}  // namespace

Matrix truncated_left_singular_vectors(const Matrix& h, int tau,
                                       std::uint64_t seed) {
  const Eigen::Index n = h.rows();
  const Eigen::Index d = h.cols();
  if (tau < 1 || tau > std::min(n, d)) {
    throw ValidationError("truncated SVD: tau out of range [1, min(n, d)]");
  }
  validate_feature_matrix(h);

  const Eigen::Index oversample = 8;
  Matrix u;
  if (tau + oversample >= std::min(n, d)) {
    Eigen::BDCSVD<Matrix> svd(h, Eigen::ComputeThinU);
    u = svd.matrixU().leftCols(tau);
  } else {
    // Randomized subspace iteration (range finder + power steps).
    Rng rng(mix_seed(seed, 0x5fd1));
    const Eigen::Index sketch = std::min<Eigen::Index>(tau + oversample, d);
    Matrix q = thin_q(h * gaussian_matrix(d, sketch, rng));
    for (int it = 0; it < 6; ++it) {
      q = thin_q(h * (h.transpose() * q));
    }
    Eigen::BDCSVD<Matrix> svd(q.transpose() * h, Eigen::ComputeThinU);
    u = q * svd.matrixU().leftCols(tau);
  }
  fix_column_signs(u);
  return u;
}

namespace {

double sq_dist(const Matrix& u, Eigen::Index i, const RowVector& c) {
  return (u.row(i) - c).squaredNorm();
}

double within_cluster_sse(const Matrix& u, const std::vector<int>& assign,
                          const Matrix& centroids) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    sse += (u.row(i) - centroids.row(assign[i])).squaredNorm();
  }
  return sse;
}

}  // namespace

KMeansResult kmeans(const Matrix& u, int k_clusters, std::uint64_t seed,
                    int max_iter, std::vector<double>* sse_history) {
  const int n = static_cast<int>(u.rows());
  if (k_clusters < 1 || k_clusters > n) {
    throw ValidationError("kmeans: K must be in [1, n]");
  }

  Rng rng(mix_seed(seed, 0x6b6d));
  Matrix centroids(k_clusters, u.cols());

  // k-means++ seeding over the data rows.
  std::vector<char> is_seed(n, 0);
  int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.row(0) = u.row(first);
  is_seed[first] = 1;
  Vector d2(n);
  for (int i = 0; i < n; ++i) d2[i] = sq_dist(u, i, centroids.row(0));
  for (int c = 1; c < k_clusters; ++c) {
    const double total = d2.sum();
    int pick = -1;
    if (total > 0.0) {
      const double target = rng.u01() * total;
      double cum = 0.0;
      for (int i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = n - 1;
    }
    if (pick < 0 || is_seed[pick]) {
      // Degenerate mass: take the smallest id not yet chosen.
      for (int i = 0; i < n; ++i) {
        if (!is_seed[i]) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = u.row(pick);
    is_seed[pick] = 1;
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(u, i, centroids.row(c)));
    }
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(u, i, centroids.row(0));
      for (int c = 1; c < k_clusters; ++c) {
        const double dd = sq_dist(u, i, centroids.row(c));
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (sse_history) sse_history->push_back(within_cluster_sse(u, assign, centroids));
    if (!changed) break;

    Matrix sums = Matrix::Zero(k_clusters, u.cols());
    std::vector<int> counts(k_clusters, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += u.row(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k_clusters; ++c) {
      if (counts[c] > 0) centroids.row(c) = sums.row(c) / counts[c];
      // Empty clusters keep their previous centroid.
    }
  }

  // Nearest node per centroid, kept distinct across clusters.
  std::vector<int> center_nodes(k_clusters, -1);
  std::vector<char> taken(n, 0);
  for (int c = 0; c < k_clusters; ++c) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double dd = sq_dist(u, i, centroids.row(c));
      if (dd < best_d) {
        best_d = dd;
        best = i;
      }
    }
    center_nodes[c] = best;
    taken[best] = 1;
  }
  return {std::move(assign), std::move(center_nodes)};
}

double closeness_score(const Matrix& u, int i, int center_node) {
  return 1.0 / (1.0 + (u.row(i) - u.row(center_node)).norm());
}

ActiveSelection select_active_nodes(const Graph& g, const Matrix& x,
                                    const ActiveSelectConfig& cfg) {
  const int n = g.num_nodes();
  if (cfg.clusters < 1) throw ValidationError("select_active_nodes: K must be >= 1");
  if (cfg.budget < cfg.clusters || cfg.budget > n) {
    throw ValidationError("select_active_nodes: need K <= B_ini <= n");
  }

  const Matrix h = propagate_features(g, x, cfg.t_hops, cfg.alpha);
  const Matrix& basis = cfg.decompose_raw_features ? x : h;
  const int tau = std::max(1, std::min<int>(cfg.tau, static_cast<int>(std::min(
                                                         basis.rows(), basis.cols()))));
  const Matrix u =
      truncated_left_singular_vectors(basis, tau, mix_seed(cfg.seed, 0xa5e1));
  KMeansResult km = kmeans(u, cfg.clusters, mix_seed(cfg.seed, 0xa5e2));

  ActiveSelection sel;
  sel.centers = km.center_nodes;
  std::vector<char> is_center(n, 0);
  for (int c : sel.centers) is_center[c] = 1;

  struct Ranked {
    double score;
    int node;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (is_center[i]) continue;
    const int center = km.center_nodes[km.assignments[i]];
    ranked.push_back({closeness_score(u, i, center), i});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });

  for (int c : sel.centers) {
    sel.members.push_back(c);
    sel.scores.push_back(closeness_score(u, c, c));
  }
  const int extra = cfg.budget - cfg.clusters;
  for (int r = 0; r < extra; ++r) {
    sel.members.push_back(ranked[r].node);
    sel.scores.push_back(ranked[r].score);
  }
  return sel;
}

}  // namespace locle
