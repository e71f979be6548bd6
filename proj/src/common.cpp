#include "locle/common.hpp"

#include <cmath>

namespace locle {

void validate_prediction_matrix(const Matrix& y, double tol) {
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const double p = y(i, j);
      if (!std::isfinite(p) || p < -tol || p > 1.0 + tol) {
        throw ValidationError("prediction matrix entry out of [0,1] at row " +
                              std::to_string(i));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ValidationError("prediction matrix row " + std::to_string(i) +
                            " sums to " + std::to_string(sum));
    }
  }
}

void validate_feature_matrix(const Matrix& x) {
  if (!x.allFinite()) {
    throw ValidationError("feature matrix contains non-finite entries");
  }
}

}  // namespace locle
