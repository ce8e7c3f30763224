#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "error.hpp"
#include "types.hpp"

namespace otalign::ridge {

/// Solves (X^T X + lambda I) w = X^T y. There is no intercept column.
inline Vector fit_ridge(const Matrix& X, const Vector& y, double lambda) {
  if (X.rows() < 1 || X.rows() != y.size()) throw Error(ErrorCode::SchemaError, "ridge design/target shape mismatch");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::ParameterError, "lambda must be >= 0");
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::NumericalError, "ridge inputs must be finite");

  Matrix A = X.transpose() * X;
  A.diagonal().array() += lambda;
  Vector b = X.transpose() * y;
  if (lambda == 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
    double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(top, 1.0)) {
      throw Error(ErrorCode::SingularSystem, "X^T X is singular and lambda is 0");
    }
  }
  Eigen::LDLT<Matrix> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "ridge system factorization failed");
  return ldlt.solve(b);
}

/// Ridge objective ||X w - y||^2 + lambda ||w||^2.
inline double ridge_objective(const Matrix& X, const Vector& y, const Vector& w, double lambda) {
  return (X * w - y).squaredNorm() + lambda * w.squaredNorm();
}

inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int v = 10; v <= 100; v += 10) g.push_back(v);
  return g;
}

struct CrossValidation {
  double lambda = 0.0;
  std::vector<double> grid;    // ascending
  std::vector<double> errors;  // mean out-of-fold squared error per grid value
};

/// K-fold CV over contiguous row blocks (rows are expected in time order).
/// Picks the lambda with the lowest pooled out-of-fold MSE; ties go to the
/// larger lambda.
inline CrossValidation cross_validate_lambda(const Matrix& X, const Vector& y,
                                             std::vector<double> grid = default_lambda_grid(),
                                             int folds = 5) {
  const Eigen::Index N = X.rows(), d = X.cols();
  if (N != y.size()) throw Error(ErrorCode::SchemaError, "ridge design/target shape mismatch");
  if (folds < 2) throw Error(ErrorCode::ParameterError, "need at least 2 folds");
  if (N < folds) throw Error(ErrorCode::InsufficientData, "fewer rows than folds");
  if (grid.empty()) throw Error(ErrorCode::ParameterError, "lambda grid is empty");
  for (double l : grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw Error(ErrorCode::ParameterError, "lambda grid values must be > 0");
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<Eigen::Index> bounds(static_cast<std::size_t>(folds) + 1);
  for (int f = 0; f <= folds; ++f) bounds[static_cast<std::size_t>(f)] = N * f / folds;

  std::vector<Matrix> grams(static_cast<std::size_t>(folds));
  std::vector<Vector> moments(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    auto lo = bounds[static_cast<std::size_t>(f)], len = bounds[static_cast<std::size_t>(f) + 1] - lo;
    auto Xf = X.middleRows(lo, len);
    grams[static_cast<std::size_t>(f)] = Xf.transpose() * Xf;
    moments[static_cast<std::size_t>(f)] = Xf.transpose() * y.segment(lo, len);
  }

  std::vector<double> sse(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    Matrix G = Matrix::Zero(d, d);
    Vector b = Vector::Zero(d);
    for (int o = 0; o < folds; ++o) {
      if (o == f) continue;
      G += grams[static_cast<std::size_t>(o)];
      b += moments[static_cast<std::size_t>(o)];
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(G);
    const Matrix& V = eig.eigenvectors();
    Vector Vb = V.transpose() * b;
    auto lo = bounds[static_cast<std::size_t>(f)], len = bounds[static_cast<std::size_t>(f) + 1] - lo;
    Matrix XV = X.middleRows(lo, len) * V;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      Vector coef = Vb.array() / (eig.eigenvalues().array().max(0.0) + grid[g]);
      sse[g] += (XV * coef - y.segment(lo, len)).squaredNorm();
    }
  }

  CrossValidation cv;
  cv.grid = grid;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double mse = sse[g] / static_cast<double>(N);
    cv.errors.push_back(mse);
    if (mse <= best) {
      best = mse;
      cv.lambda = grid[g];
    }
  }
  return cv;
}

}  // namespace otalign::ridge
