#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace locle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

// Role aliases. A PredictionMatrix is n x k and row-stochastic, a
// FeatureMatrix is n x d with finite entries; see the validators below.
using PredictionMatrix = Matrix;
using FeatureMatrix = Matrix;

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class AnnotateError : public std::runtime_error {
 public:
  explicit AnnotateError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public AnnotateError {
 public:
  explicit ParseError(const std::string& msg) : AnnotateError(msg) {}
};

class UnknownLabel : public AnnotateError {
 public:
  explicit UnknownLabel(const std::string& msg) : AnnotateError(msg) {}
};

class TransportError : public AnnotateError {
 public:
  explicit TransportError(const std::string& msg) : AnnotateError(msg) {}
};

class BudgetExhausted : public std::runtime_error {
 public:
  explicit BudgetExhausted(const std::string& msg) : std::runtime_error(msg) {}
};

class InsufficientSeeds : public std::runtime_error {
 public:
  explicit InsufficientSeeds(const std::string& msg) : std::runtime_error(msg) {}
};

/// Throws ValidationError unless every row of `y` sums to 1 within `tol`
/// and all entries lie in [0, 1].
void validate_prediction_matrix(const Matrix& y, double tol = 1e-6);

/// Throws ValidationError if `x` contains NaN or infinite entries.
void validate_feature_matrix(const Matrix& x);

}  // namespace locle
