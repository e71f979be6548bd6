#include "locle/rewire.hpp"

#include "locle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace locle {

Matrix optimal_laplacian(const Matrix& h, double beta) {
  if (beta < 0.0) throw ValidationError("optimal_laplacian: beta must be >= 0");
  const Matrix hht = h * h.transpose();
  const double fro = hht.norm();
  if (fro == 0.0) {
    throw ValidationError("optimal_laplacian: H H^T has zero Frobenius norm");
  }
  Matrix l = Matrix::Identity(h.rows(), h.rows());
  l -= (beta / fro) * hht;
  return l;
}

Matrix encode(const EncoderModel& model, const Matrix& y) {
  const Matrix a1 = ((y * model.w1).rowwise() + model.b1).cwiseMax(0.0);
  return (a1 * model.w2).rowwise() + model.b2;
}

std::vector<double> pair_scores(const Matrix& h, const std::vector<Edge>& pairs) {
  std::vector<double> w(pairs.size());
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    w[e] = std::max(h.row(pairs[e].u).dot(h.row(pairs[e].v)), 0.0);
  }
  return w;
}

double energy_loss(const std::vector<Edge>& pairs, const std::vector<double>& weights,
                   const Matrix& y, double lambda, int num_nodes) {
  if (pairs.empty()) throw ValidationError("energy loss needs a nonempty support");
  if (weights.size() != pairs.size()) {
    throw ValidationError("energy loss: weights do not align with pairs");
  }
  Vector deg = Vector::Zero(num_nodes);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    deg[pairs[e].u] += weights[e];
    deg[pairs[e].v] += weights[e];
  }
  double trace = 0.0;
  double fro2 = 0.0;
  for (int i = 0; i < num_nodes; ++i) {
    if (deg[i] > 0.0) fro2 += 1.0;  // unit diagonal of the active rows
  }
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const double w = weights[e];
    if (w <= 0.0) continue;
    const int u = pairs[e].u;
    const int v = pairs[e].v;
    trace += w * (y.row(u) / std::sqrt(deg[u]) - y.row(v) / std::sqrt(deg[v]))
                     .squaredNorm();
    fro2 += 2.0 * w * w / (deg[u] * deg[v]);
  }
  const double scale = static_cast<double>(num_nodes) / static_cast<double>(pairs.size());
  return scale * (trace - lambda * fro2);
}

double dirichlet_loss(const Graph& g_weighted, const Matrix& y, double lambda) {
  if (g_weighted.num_edges() == 0) {
    throw ValidationError("dirichlet_loss: graph has no edges");
  }
  std::vector<double> w(g_weighted.num_edges());
  for (std::size_t e = 0; e < w.size(); ++e) w[e] = g_weighted.edge_weight(e);
  return energy_loss(g_weighted.edges(), w, y, lambda, g_weighted.num_nodes());
}

Matrix energy_loss_grad_h(const Matrix& h, const std::vector<Edge>& pairs,
                          const Matrix& y, double lambda, int num_nodes,
                          double* loss_out) {
  const std::vector<double> w = pair_scores(h, pairs);
  if (loss_out) *loss_out = energy_loss(pairs, w, y, lambda, num_nodes);

  Vector deg = Vector::Zero(num_nodes);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    deg[pairs[e].u] += w[e];
    deg[pairs[e].v] += w[e];
  }

  // Per-node sums feeding the degree chain rule:
  //   g1[a] = sum_e w_e c_e / sqrt(d_x),  g2[a] = sum_e w_e^2 / d_x
  // over edges e = (a, x) with positive weight, where c_e = y_a . y_x.
  Vector g1 = Vector::Zero(num_nodes);
  Vector g2 = Vector::Zero(num_nodes);
  std::vector<double> dots(pairs.size(), 0.0);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    if (w[e] <= 0.0) continue;
    const int u = pairs[e].u;
    const int v = pairs[e].v;
    dots[e] = y.row(u).dot(y.row(v));
    g1[u] += w[e] * dots[e] / std::sqrt(deg[v]);
    g1[v] += w[e] * dots[e] / std::sqrt(deg[u]);
    g2[u] += w[e] * w[e] / deg[v];
    g2[v] += w[e] * w[e] / deg[u];
  }

  const double scale = static_cast<double>(num_nodes) / static_cast<double>(pairs.size());
  Matrix grad = Matrix::Zero(h.rows(), h.cols());
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    if (w[e] <= 0.0) continue;  // relu gate shut, no flow
    const int u = pairs[e].u;
    const int v = pairs[e].v;
    const double du = deg[u];
    const double dv = deg[v];
    // d trace / d w_e, via trace = sum ||y_i||^2 - 2 sum w c / sqrt(dd)
    const double ds = dots[e] / std::sqrt(du * dv) -
                      0.5 * (g1[u] / std::pow(du, 1.5) + g1[v] / std::pow(dv, 1.5));
    const double dtrace = -2.0 * ds;
    // d fro2 / d w_e
    const double dq = 2.0 * w[e] / (du * dv) - g2[u] / (du * du) - g2[v] / (dv * dv);
    const double dfro = 2.0 * dq;
    const double dloss = scale * (dtrace - lambda * dfro);
    grad.row(u) += dloss * h.row(v);
    grad.row(v) += dloss * h.row(u);
  }
  return grad;
}

std::vector<Edge> candidate_pairs(const Graph& g, const std::vector<int>& train_nodes,
                                  std::size_t max_per_node, const Matrix* score_h) {
  std::vector<char> in_train(g.num_nodes(), 0);
  for (int t : train_nodes) in_train[t] = 1;

  std::vector<int> train_sorted(train_nodes);
  std::sort(train_sorted.begin(), train_sorted.end());
  train_sorted.erase(std::unique(train_sorted.begin(), train_sorted.end()),
                     train_sorted.end());

  std::vector<Edge> out;
  for (int j = 0; j < g.num_nodes(); ++j) {
    if (in_train[j]) continue;
    if (max_per_node > 0 && score_h && train_sorted.size() > max_per_node) {
      struct Scored {
        double s;
        int t;
      };
      std::vector<Scored> scored;
      scored.reserve(train_sorted.size());
      for (int t : train_sorted) {
        if (g.has_edge(t, j)) continue;
        scored.push_back({score_h->row(j).dot(score_h->row(t)), t});
      }
      std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.s != b.s) return a.s > b.s;
        return a.t < b.t;
      });
      const std::size_t keep = std::min(max_per_node, scored.size());
      for (std::size_t r = 0; r < keep; ++r) out.push_back(make_edge(scored[r].t, j));
    } else {
      for (int t : train_sorted) {
        if (!g.has_edge(t, j)) out.push_back(make_edge(t, j));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

EncoderModel train_encoder(const Graph& g, const PredictionMatrix& y, double lambda,
                           const EncoderHyper& hyper,
                           const std::vector<Edge>& candidates,
                           std::vector<double>* loss_history) {
  std::vector<Edge> support(g.edges());
  support.insert(support.end(), candidates.begin(), candidates.end());
  if (support.empty()) {
    throw ValidationError("train_encoder: no edges and no candidate pairs");
  }

  Rng rng(mix_seed(hyper.seed, 0xe60d));
  EncoderModel model;
  model.hyper = hyper;
  const double bound1 = std::sqrt(6.0 / static_cast<double>(y.cols() + hyper.hidden_dim));
  model.w1.resize(y.cols(), hyper.hidden_dim);
  for (Eigen::Index j = 0; j < model.w1.cols(); ++j) {
    for (Eigen::Index i = 0; i < model.w1.rows(); ++i) {
      model.w1(i, j) = rng.uniform(-bound1, bound1);
    }
  }
  model.b1 = RowVector::Zero(hyper.hidden_dim);
  const double bound2 =
      std::sqrt(6.0 / static_cast<double>(hyper.hidden_dim + hyper.out_dim));
  model.w2.resize(hyper.hidden_dim, hyper.out_dim);
  for (Eigen::Index j = 0; j < model.w2.cols(); ++j) {
    for (Eigen::Index i = 0; i < model.w2.rows(); ++i) {
      model.w2(i, j) = rng.uniform(-bound2, bound2);
    }
  }
  model.b2 = RowVector::Zero(hyper.out_dim);

  const int n = g.num_nodes();
  auto loss_at = [&](const EncoderModel& m) {
    const Matrix h = encode(m, y);
    return energy_loss(support, pair_scores(h, support), y, lambda, n);
  };

  double lr = hyper.learning_rate;
  double loss = loss_at(model);
  if (loss_history) loss_history->push_back(loss);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    // Forward + backward through the MLP.
    const Matrix z1 = (y * model.w1).rowwise() + model.b1;
    const Matrix a1 = z1.cwiseMax(0.0);
    const Matrix h = (a1 * model.w2).rowwise() + model.b2;
    const Matrix dh = energy_loss_grad_h(h, support, y, lambda, n, nullptr);
    const Matrix dw2 = a1.transpose() * dh;
    const RowVector db2 = dh.colwise().sum();
    const Matrix da1 = dh * model.w2.transpose();
    const Matrix dz1 = (z1.array() > 0.0).cast<double>().matrix().cwiseProduct(da1);
    const Matrix dw1 = y.transpose() * dz1;
    const RowVector db1 = dz1.colwise().sum();

    // Backtracking keeps the epoch losses non-increasing.
    bool accepted = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      EncoderModel trial = model;
      trial.w1 -= lr * dw1;
      trial.b1 -= lr * db1;
      trial.w2 -= lr * dw2;
      trial.b2 -= lr * db2;
      const double trial_loss = loss_at(trial);
      if (trial_loss <= loss) {
        model.w1 = trial.w1;
        model.b1 = trial.b1;
        model.w2 = trial.w2;
        model.b2 = trial.b2;
        loss = trial_loss;
        accepted = true;
      } else {
        lr *= 0.5;
      }
    }
    if (loss_history) loss_history->push_back(loss);
    if (!accepted) break;  // step size underflowed, converged
  }
  return model;
}

RewirePlan plan_rewiring(const Graph& g, const Matrix& h,
                         const std::vector<int>& train_nodes, double delta_minus,
                         double delta_plus, std::size_t max_candidates_per_node) {
  if (delta_minus < 0.0 || delta_plus < 0.0) {
    throw ValidationError("plan_rewiring: ratios must be >= 0");
  }
  if (delta_plus > 0.0 && train_nodes.empty()) {
    throw ValidationError("plan_rewiring: additions need a nonempty training set");
  }

  RewirePlan plan;
  const std::size_t n_remove =
      static_cast<std::size_t>(delta_minus * static_cast<double>(g.num_edges()));
  const std::size_t n_add =
      static_cast<std::size_t>(delta_plus * static_cast<double>(g.num_edges()));

  if (n_remove > 0) {
    std::vector<std::size_t> order(g.num_edges());
    for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
    const std::vector<double> w = pair_scores(h, g.edges());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (w[a] != w[b]) return w[a] < w[b];
      return g.edges()[a] < g.edges()[b];
    });
    for (std::size_t r = 0; r < n_remove && r < order.size(); ++r) {
      plan.remove.push_back(g.edges()[order[r]]);
      plan.remove_scores.push_back(w[order[r]]);
    }
  }

  if (n_add > 0) {
    std::size_t cap = max_candidates_per_node;
    if (cap == 0) {
      const std::size_t pool =
          static_cast<std::size_t>(g.num_nodes()) - train_nodes.size();
      if (train_nodes.size() * pool > 1'000'000) {
        cap = std::max<std::size_t>(1, 1'000'000 / std::max<std::size_t>(pool, 1));
      }
    }
    std::vector<Edge> cands = candidate_pairs(g, train_nodes, cap, &h);
    std::vector<double> w = pair_scores(h, cands);
    std::vector<std::size_t> order(cands.size());
    for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (w[a] != w[b]) return w[a] > w[b];
      return cands[a] < cands[b];
    });
    for (std::size_t r = 0; r < n_add && r < order.size(); ++r) {
      plan.add.push_back(cands[order[r]]);
      plan.add_scores.push_back(w[order[r]]);
    }
  }
  return plan;
}

Graph apply_rewiring(const Graph& g, const RewirePlan& plan,
                     bool keep_scores_as_weights) {
  std::unordered_set<long long> removed;
  removed.reserve(plan.remove.size());
  const auto key = [](const Edge& e) {
    return static_cast<long long>(e.u) * (1LL << 32) + e.v;
  };
  for (const Edge& e : plan.remove) removed.insert(key(e));

  std::vector<std::pair<int, int>> edges;
  std::vector<double> weights;
  edges.reserve(g.num_edges() + plan.add.size());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edges()[e];
    if (removed.count(key(ed))) continue;
    edges.emplace_back(ed.u, ed.v);
    if (keep_scores_as_weights) weights.push_back(g.edge_weight(e));
  }
  for (std::size_t a = 0; a < plan.add.size(); ++a) {
    edges.emplace_back(plan.add[a].u, plan.add[a].v);
    if (keep_scores_as_weights) weights.push_back(plan.add_scores[a]);
  }
  return Graph(g.num_nodes(), std::move(edges), std::move(weights));
}

PredictionMatrix predict_rewired(const Graph& g_hat, const PredictionMatrix& y_round,
                                 const std::vector<int>& train_nodes,
                                 const std::vector<int>& train_labels,
                                 int num_classes, const GnnHyper& hyper) {
  const GnnModel model =
      train_gnn(g_hat, y_round, train_nodes, train_labels, num_classes, hyper);
  return predict(model, g_hat, y_round);
}

}  // namespace locle
