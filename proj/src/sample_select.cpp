#include "locle/sample_select.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace locle {

double label_entropy(const Eigen::Ref<const PredictionMatrix>& ybar, int node,
                     double sigma) {
  if (node < 0 || node >= ybar.rows()) {
    throw ValidationError("label_entropy: node out of range");
  }
  double le = 0.0;
  for (Eigen::Index j = 0; j < ybar.cols(); ++j) {
    const double p = ybar(node, j);
    le -= p * std::log(p + sigma);
  }
  return le;
}

double label_disharmonicity(const Graph& g,
                            const Eigen::Ref<const PredictionMatrix>& ybar,
                            int node) {
  if (node < 0 || node >= g.num_nodes() || ybar.rows() != g.num_nodes()) {
    throw ValidationError("label_disharmonicity: bad node or matrix shape");
  }
  const auto nbrs = g.neighbors(node);
  if (nbrs.empty()) return 0.0;
  RowVector mean = RowVector::Zero(ybar.cols());
  for (int nb : nbrs) mean += ybar.row(nb);
  mean /= static_cast<double>(nbrs.size());
  return (ybar.row(node) - mean).norm();
}

namespace {

struct ScoredNode {
  double score;
  int node;
};

/// First `q` pool nodes ordered by ascending or descending score, ties
/// toward the smaller id.
std::vector<int> top_nodes(const std::vector<int>& pool,
                           const std::unordered_map<int, double>& score,
                           std::size_t q, bool ascending) {
  std::vector<ScoredNode> ranked;
  ranked.reserve(pool.size());
  for (int v : pool) ranked.push_back({score.at(v), v});
  std::sort(ranked.begin(), ranked.end(),
            [ascending](const ScoredNode& a, const ScoredNode& b) {
              if (a.score != b.score) {
                return ascending ? a.score < b.score : a.score > b.score;
              }
              return a.node < b.node;
            });
  std::vector<int> out;
  out.reserve(std::min(q, ranked.size()));
  for (std::size_t i = 0; i < ranked.size() && i < q; ++i) {
    out.push_back(ranked[i].node);
  }
  return out;
}

/// One side of the construction: intersect the two quota-sized top lists,
/// then fill the remainder half from each list's complement.
std::vector<int> pick_side(const std::vector<int>& pool,
                           const std::unordered_map<int, double>& le,
                           const std::unordered_map<int, double>& lh,
                           std::size_t quota, bool certain) {
  const bool asc = certain;  // certain: smallest LH / smallest LE
  const std::vector<int> s_har = top_nodes(pool, lh, quota, asc);
  const std::vector<int> s_ent = top_nodes(pool, le, quota, asc);
  const std::unordered_set<int> har_set(s_har.begin(), s_har.end());
  const std::unordered_set<int> ent_set(s_ent.begin(), s_ent.end());

  std::vector<int> result;
  for (int v : s_har) {
    if (ent_set.count(v)) result.push_back(v);
  }
  if (result.size() >= quota) {
    result.resize(quota);
    std::sort(result.begin(), result.end());
    return result;
  }
  const std::size_t need = std::min(quota, std::min(s_har.size(), s_ent.size())) -
                           result.size();
  const std::size_t from_har = (need + 1) / 2;
  const std::size_t from_ent = need / 2;
  std::size_t taken = 0;
  for (int v : s_har) {
    if (taken == from_har) break;
    if (!ent_set.count(v)) {
      result.push_back(v);
      ++taken;
    }
  }
  taken = 0;
  for (int v : s_ent) {
    if (taken == from_ent) break;
    if (!har_set.count(v)) {
      result.push_back(v);
      ++taken;
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

}  // namespace

SelectionResult select_informative_scores(const std::vector<int>& pool,
                                          const std::vector<double>& le,
                                          const std::vector<double>& lh,
                                          int quota_certain, int quota_uncertain) {
  if (quota_certain < 0 || quota_uncertain < 0) {
    throw ValidationError("select_informative: quotas must be >= 0");
  }
  if (le.size() != pool.size() || lh.size() != pool.size()) {
    throw ValidationError("select_informative: score tables do not align with pool");
  }
  std::unordered_map<int, double> le_map, lh_map;
  le_map.reserve(pool.size());
  lh_map.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    le_map[pool[i]] = le[i];
    lh_map[pool[i]] = lh[i];
  }

  SelectionResult res;
  res.entropy = le;
  res.disharmonicity = lh;
  res.certain = pick_side(pool, le_map, lh_map,
                          static_cast<std::size_t>(quota_certain), true);

  // Certain set has priority; the uncertain side draws from what remains so
  // a tiny pool backfills with the next-ranked nodes.
  std::unordered_set<int> taken(res.certain.begin(), res.certain.end());
  std::vector<int> rest;
  rest.reserve(pool.size());
  for (int v : pool) {
    if (!taken.count(v)) rest.push_back(v);
  }
  res.uncertain = pick_side(rest, le_map, lh_map,
                            static_cast<std::size_t>(quota_uncertain), false);

  res.truncated = res.certain.size() < static_cast<std::size_t>(quota_certain) ||
                  res.uncertain.size() < static_cast<std::size_t>(quota_uncertain);
  return res;
}

SelectionResult select_informative(const Graph& g, const PredictionMatrix& ybar,
                                   const std::vector<int>& pool,
                                   int quota_certain, int quota_uncertain) {
  std::vector<double> le(pool.size()), lh(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    le[i] = label_entropy(ybar, pool[i]);
    lh[i] = label_disharmonicity(g, ybar, pool[i]);
  }
  return select_informative_scores(pool, le, lh, quota_certain, quota_uncertain);
}

}  // namespace locle
