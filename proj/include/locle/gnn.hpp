#pragma once

#include "locle/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace locle {

struct GnnHyper {
  int hidden_dim = 64;
  double learning_rate = 0.01;
  double dropout_rate = 0.5;
  int epochs = 20;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
};

/// Two-layer graph convolution: softmax(A_sl (relu(A_sl X W1 + b1)) W2 + b2)
/// with A_sl the self-looped normalized adjacency. Dropout hits the hidden
/// activations during training only.
struct GnnModel {
  Matrix w1;
  RowVector b1;
  Matrix w2;
  RowVector b2;
  GnnHyper hyper;
};

/// Full-batch training with Adam on mean cross-entropy over `train_nodes`
/// plus L2 weight decay on W1/W2. Deterministic given hyper.seed.
GnnModel train_gnn(const Graph& g, const Matrix& x,
                   const std::vector<int>& train_nodes,
                   const std::vector<int>& train_labels, int num_classes,
                   const GnnHyper& hyper);

Matrix predict_logits(const GnnModel& model, const Graph& g, const Matrix& x);

/// Row-stochastic class probabilities (dropout disabled).
PredictionMatrix predict(const GnnModel& model, const Graph& g, const Matrix& x);

struct GnnGradients {
  double loss = 0.0;
  Matrix dw1;
  RowVector db1;
  Matrix dw2;
  RowVector db2;
};

/// Loss and analytic parameter gradients at fixed parameters with dropout
/// off. `weight_decay` overrides the model's setting so the cross-entropy
/// term can be checked in isolation.
GnnGradients gnn_loss_gradients(const GnnModel& model, const SparseMatrix& a_sl,
                                const Matrix& x,
                                const std::vector<int>& train_nodes,
                                const std::vector<int>& train_labels,
                                double weight_decay);

/// Per-round ensemble weights, normalized to sum to 1: proportional to
/// (1 - alpha) * alpha^r for alpha != 1 and uniform in the alpha -> 1 limit.
std::vector<double> ensemble_weights(int rounds, double alpha);

/// Weighted average of the per-round prediction matrices. `reverse_weights`
/// flips the weight sequence so later rounds carry the larger weights.
PredictionMatrix ensemble_predictions(const std::vector<PredictionMatrix>& history,
                                      double alpha, bool reverse_weights = false);

/// Versioned little-endian float32 checkpoint.
void save_model(const GnnModel& model, const std::string& path);
GnnModel load_model(const std::string& path);

}  // namespace locle
