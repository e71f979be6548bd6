#include "locle/gnn.hpp"

#include "locle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace locle {

namespace {

Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (Eigen::Index j = 0; j < fan_out; ++j) {
    for (Eigen::Index i = 0; i < fan_in; ++i) w(i, j) = rng.uniform(-bound, bound);
  }
  return w;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    RowVector e = (logits.row(i).array() - m).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

struct ForwardCache {
  Matrix ax;   // A_sl * X
  Matrix z1;   // ax * W1 + b1
  Matrix h1;   // dropout(relu(z1))
  Matrix ah1;  // A_sl * h1
  Matrix probs;
};

ForwardCache forward(const GnnModel& m, const SparseMatrix& a_sl, const Matrix& x,
                     const Matrix* dropout_mask) {
  ForwardCache c;
  c.ax = a_sl * x;
  c.z1 = (c.ax * m.w1).rowwise() + m.b1;
  c.h1 = c.z1.cwiseMax(0.0);
  if (dropout_mask) c.h1 = c.h1.cwiseProduct(*dropout_mask);
  c.ah1 = a_sl * c.h1;
  c.probs = softmax_rows((c.ah1 * m.w2).rowwise() + m.b2);
  return c;
}

GnnGradients backward(const GnnModel& m, const SparseMatrix& a_sl,
                      const ForwardCache& c,
                      const std::vector<int>& train_nodes,
                      const std::vector<int>& train_labels,
                      const Matrix* dropout_mask, double weight_decay) {
  const double inv_m = 1.0 / static_cast<double>(train_nodes.size());

  GnnGradients g;
  g.loss = 0.0;
  Matrix dz2 = Matrix::Zero(c.probs.rows(), c.probs.cols());
  for (std::size_t t = 0; t < train_nodes.size(); ++t) {
    const int i = train_nodes[t];
    const int y = train_labels[t];
    g.loss -= std::log(std::max(c.probs(i, y), 1e-300));
    dz2.row(i) = c.probs.row(i) * inv_m;
    dz2(i, y) -= inv_m;
  }
  g.loss *= inv_m;
  g.loss += 0.5 * weight_decay * (m.w1.squaredNorm() + m.w2.squaredNorm());

  g.dw2 = c.ah1.transpose() * dz2 + weight_decay * m.w2;
  g.db2 = dz2.colwise().sum();

  Matrix dh1 = a_sl * (dz2 * m.w2.transpose());  // A_sl is symmetric
  if (dropout_mask) dh1 = dh1.cwiseProduct(*dropout_mask);
  Matrix dz1 = (c.z1.array() > 0.0).cast<double>().matrix().cwiseProduct(dh1);

  g.dw1 = c.ax.transpose() * dz1 + weight_decay * m.w1;
  g.db1 = dz1.colwise().sum();
  return g;
}

struct AdamState {
  Matrix mw1, vw1, mw2, vw2;
  RowVector mb1, vb1, mb2, vb2;
  int t = 0;
};

void adam_step(Matrix& p, Matrix& m, Matrix& v, const Matrix& grad, double lr,
               int t) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
  const double corr = lr * std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
  p.array() -= corr * m.array() / (v.array().sqrt() + eps);
}

void adam_step(RowVector& p, RowVector& m, RowVector& v, const RowVector& grad,
               double lr, int t) {
  Matrix pm = p, mm = m, vm = v;
  adam_step(pm, mm, vm, Matrix(grad), lr, t);
  p = pm;
  m = mm;
  v = vm;
}

}  // namespace

GnnModel train_gnn(const Graph& g, const Matrix& x,
                   const std::vector<int>& train_nodes,
                   const std::vector<int>& train_labels, int num_classes,
                   const GnnHyper& hyper) {
  if (train_nodes.empty()) throw ValidationError("train_gnn: empty training set");
  if (train_labels.size() != train_nodes.size()) {
    throw ValidationError("train_gnn: labels do not align with nodes");
  }
  for (std::size_t t = 0; t < train_nodes.size(); ++t) {
    const int i = train_nodes[t];
    if (i < 0 || i >= g.num_nodes()) {
      throw ValidationError("train_gnn: node id out of range");
    }
    if (train_labels[t] < 0 || train_labels[t] >= num_classes) {
      throw ValidationError("train_gnn: label out of range [0, k)");
    }
  }

  Rng rng(mix_seed(hyper.seed, 0x6e6e));
  GnnModel model;
  model.hyper = hyper;
  model.w1 = glorot_uniform(x.cols(), hyper.hidden_dim, rng);
  model.b1 = RowVector::Zero(hyper.hidden_dim);
  model.w2 = glorot_uniform(hyper.hidden_dim, num_classes, rng);
  model.b2 = RowVector::Zero(num_classes);

  const SparseMatrix a_sl = normalized_adjacency(g, true);

  AdamState adam;
  adam.mw1 = Matrix::Zero(model.w1.rows(), model.w1.cols());
  adam.vw1 = adam.mw1;
  adam.mw2 = Matrix::Zero(model.w2.rows(), model.w2.cols());
  adam.vw2 = adam.mw2;
  adam.mb1 = RowVector::Zero(model.b1.size());
  adam.vb1 = adam.mb1;
  adam.mb2 = RowVector::Zero(model.b2.size());
  adam.vb2 = adam.mb2;

  const bool use_dropout = hyper.dropout_rate > 0.0;
  const double keep = 1.0 - hyper.dropout_rate;
  Matrix mask;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const Matrix* mask_ptr = nullptr;
    if (use_dropout) {
      mask.resize(g.num_nodes(), hyper.hidden_dim);
      for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
          mask(i, j) = rng.u01() < keep ? 1.0 / keep : 0.0;
        }
      }
      mask_ptr = &mask;
    }
    const ForwardCache cache = forward(model, a_sl, x, mask_ptr);
    const GnnGradients grads = backward(model, a_sl, cache, train_nodes,
                                        train_labels, mask_ptr,
                                        hyper.weight_decay);
    ++adam.t;
    adam_step(model.w1, adam.mw1, adam.vw1, grads.dw1, hyper.learning_rate, adam.t);
    adam_step(model.b1, adam.mb1, adam.vb1, grads.db1, hyper.learning_rate, adam.t);
    adam_step(model.w2, adam.mw2, adam.vw2, grads.dw2, hyper.learning_rate, adam.t);
    adam_step(model.b2, adam.mb2, adam.vb2, grads.db2, hyper.learning_rate, adam.t);
  }
  return model;
}

Matrix predict_logits(const GnnModel& model, const Graph& g, const Matrix& x) {
  if (x.rows() != g.num_nodes() || x.cols() != model.w1.rows()) {
    throw ValidationError("predict: feature shape does not match model");
  }
  const SparseMatrix a_sl = normalized_adjacency(g, true);
  const Matrix h1 = (((a_sl * x) * model.w1).rowwise() + model.b1).cwiseMax(0.0);
  return ((a_sl * h1) * model.w2).rowwise() + model.b2;
}

PredictionMatrix predict(const GnnModel& model, const Graph& g, const Matrix& x) {
  return softmax_rows(predict_logits(model, g, x));
}

GnnGradients gnn_loss_gradients(const GnnModel& model, const SparseMatrix& a_sl,
                                const Matrix& x,
                                const std::vector<int>& train_nodes,
                                const std::vector<int>& train_labels,
                                double weight_decay) {
  const ForwardCache cache = forward(model, a_sl, x, nullptr);
  return backward(model, a_sl, cache, train_nodes, train_labels, nullptr,
                  weight_decay);
}

std::vector<double> ensemble_weights(int rounds, double alpha) {
  if (rounds < 1) throw ValidationError("ensemble: need at least one round");
  if (alpha <= 0.0) throw ValidationError("ensemble: alpha must be > 0");
  std::vector<double> w(rounds);
  if (alpha == 1.0) {
    std::fill(w.begin(), w.end(), 1.0 / rounds);
    return w;
  }
  // Proportional to (1 - alpha) * alpha^r; the damping factor cancels in the
  // normalization, leaving alpha^r / sum_j alpha^j.
  double sum = 0.0;
  double p = 1.0;
  for (int r = 0; r < rounds; ++r) {
    p *= alpha;
    w[r] = p;
    sum += p;
  }
  for (double& x : w) x /= sum;
  return w;
}

PredictionMatrix ensemble_predictions(const std::vector<PredictionMatrix>& history,
                                      double alpha, bool reverse_weights) {
  if (history.empty()) throw ValidationError("ensemble: empty history");
  for (const auto& y : history) {
    if (y.rows() != history.front().rows() || y.cols() != history.front().cols()) {
      throw ValidationError("ensemble: prediction shapes differ");
    }
  }
  std::vector<double> w = ensemble_weights(static_cast<int>(history.size()), alpha);
  if (reverse_weights) std::reverse(w.begin(), w.end());
  PredictionMatrix out = Matrix::Zero(history.front().rows(), history.front().cols());
  for (std::size_t r = 0; r < history.size(); ++r) out += w[r] * history[r];
  return out;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4c47434e;  // "LGCN"
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ValidationError("checkpoint: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32_block(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float f = static_cast<float>(m(i, j));
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      write_u32(os, bits);
    }
  }
}

Matrix read_f32_block(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::uint32_t bits = read_u32(is);
      float f;
      std::memcpy(&f, &bits, 4);
      m(i, j) = f;
    }
  }
  return m;
}

}  // namespace

void save_model(const GnnModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("checkpoint: cannot open " + path);
  write_u32(os, kCheckpointMagic);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<std::uint32_t>(model.w1.rows()));
  write_u32(os, static_cast<std::uint32_t>(model.w1.cols()));
  write_u32(os, static_cast<std::uint32_t>(model.w2.cols()));
  write_f32_block(os, model.w1);
  write_f32_block(os, model.b1);
  write_f32_block(os, model.w2);
  write_f32_block(os, model.b2);
}

GnnModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("checkpoint: cannot open " + path);
  if (read_u32(is) != kCheckpointMagic) {
    throw ValidationError("checkpoint: bad magic in " + path);
  }
  if (read_u32(is) != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version in " + path);
  }
  const Eigen::Index d_in = read_u32(is);
  const Eigen::Index hidden = read_u32(is);
  const Eigen::Index k = read_u32(is);
  GnnModel model;
  model.w1 = read_f32_block(is, d_in, hidden);
  model.b1 = read_f32_block(is, 1, hidden);
  model.w2 = read_f32_block(is, hidden, k);
  model.b2 = read_f32_block(is, 1, k);
  model.hyper.hidden_dim = static_cast<int>(hidden);
  return model;
}

}  // namespace locle
