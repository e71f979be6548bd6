#pragma once

#include "locle/gnn.hpp"
#include "locle/graph.hpp"

#include <cstdint>
#include <vector>

namespace locle {

/// Closed-form energy minimizer over normalized Laplacians with a fixed
/// adjacency Frobenius norm: I - beta * H H^T / ||H H^T||_F.
Matrix optimal_laplacian(const Matrix& h, double beta);

struct EncoderHyper {
  int hidden_dim = 64;
  int out_dim = 32;
  double learning_rate = 0.05;
  int epochs = 80;
  std::uint64_t seed = 0;
};

/// Two-layer MLP edge encoder: H = relu(Y W1 + b1) W2 + b2. Pair scores are
/// max(H_i . H_j, 0).
struct EncoderModel {
  Matrix w1;
  RowVector b1;
  Matrix w2;
  RowVector b2;
  EncoderHyper hyper;
};

Matrix encode(const EncoderModel& model, const Matrix& y);

/// Pair score table for a support list, w_e = max(H_i . H_j, 0).
std::vector<double> pair_scores(const Matrix& h, const std::vector<Edge>& pairs);

/// (|V|/|E|) * (Tr(Y^T L_w Y) - lambda * ||L_w||_F^2) over the weighted
/// support; the degree-normalized Laplacian drops rows whose incident
/// weights are all zero.
double energy_loss(const std::vector<Edge>& pairs, const std::vector<double>& weights,
                   const Matrix& y, double lambda, int num_nodes);

/// Same loss over a weighted Graph (|E| = its stored edge count).
double dirichlet_loss(const Graph& g_weighted, const Matrix& y, double lambda);

/// Gradient of energy_loss with respect to H (for max(H_i . H_j, 0) edge
/// weights). Exposed for the finite-difference check.
Matrix energy_loss_grad_h(const Matrix& h, const std::vector<Edge>& pairs,
                          const Matrix& y, double lambda, int num_nodes,
                          double* loss_out = nullptr);

/// Candidate pairs (i in train_nodes, j outside, (i, j) not an edge). With
/// `max_per_node` > 0 each outside node keeps only its top-scoring labeled
/// partners under `score_h` (dot products of its rows).
std::vector<Edge> candidate_pairs(const Graph& g, const std::vector<int>& train_nodes,
                                  std::size_t max_per_node = 0,
                                  const Matrix* score_h = nullptr);

/// Trains the encoder on the soft support (existing edges plus candidates)
/// by full-batch gradient descent with backtracking on the step size.
/// Deterministic given hyper.seed. `loss_history`, when given, receives the
/// loss after every epoch (entry 0 is the starting loss).
EncoderModel train_encoder(const Graph& g, const PredictionMatrix& y, double lambda,
                           const EncoderHyper& hyper,
                           const std::vector<Edge>& candidates,
                           std::vector<double>* loss_history = nullptr);

struct RewirePlan {
  std::vector<Edge> remove;
  std::vector<Edge> add;
  std::vector<double> remove_scores;
  std::vector<double> add_scores;
};

/// Ranks existing edges (ascending score) and candidate pairs (descending
/// score); takes floor(delta_minus * |E|) removals and floor(delta_plus *
/// |E|) additions. Ties break by (min id, max id).
RewirePlan plan_rewiring(const Graph& g, const Matrix& h,
                         const std::vector<int>& train_nodes, double delta_minus,
                         double delta_plus, std::size_t max_candidates_per_node = 0);

/// Edge set (E union add) minus remove. Unweighted by default; with
/// `keep_scores_as_weights` surviving edges carry their plan scores (1 for
/// untouched edges).
Graph apply_rewiring(const Graph& g, const RewirePlan& plan,
                     bool keep_scores_as_weights = false);

/// Fresh GCN on the rewired graph with the round's predictions as input
/// features.
PredictionMatrix predict_rewired(const Graph& g_hat, const PredictionMatrix& y_round,
                                 const std::vector<int>& train_nodes,
                                 const std::vector<int>& train_labels,
                                 int num_classes, const GnnHyper& hyper);

}  // namespace locle
