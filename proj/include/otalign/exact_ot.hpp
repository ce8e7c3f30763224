#pragma once

#include <cmath>
#include <vector>

#include "error.hpp"
#include "types.hpp"

namespace otalign::ot {

inline constexpr Eigen::Index kOracleMaxEntries = 64;

/// Exact solution of the discrete Kantorovich problem
///   min <C, G>  s.t.  G 1 = p,  G^T 1 = q,  G >= 0
/// by a dense two-phase tableau simplex with Bland's rule. Only meant for
/// tiny instances used as a reference in tests.
inline Matrix exact_ot_oracle(const Matrix& cost, const Vector& p, const Vector& q) {
  const Eigen::Index n = cost.rows(), m = cost.cols();
  if (n * m > kOracleMaxEntries) {
    throw Error(ErrorCode::OracleTooLarge, "exact oracle supports at most 64 plan entries");
  }
  if (n == 0 || m == 0 || p.size() != n || q.size() != m) {
    throw Error(ErrorCode::SchemaError, "oracle shapes are inconsistent");
  }
  if ((p.array() < 0).any() || (q.array() < 0).any() || std::abs(p.sum() - q.sum()) > 1e-9) {
    throw Error(ErrorCode::ParameterError, "marginals must be nonnegative with equal mass");
  }

  constexpr double kEps = 1e-12;
  const int rows = static_cast<int>(n + m);
  const int vars = static_cast<int>(n * m);
  const int cols = vars + rows;  // structural + artificial
  const int rhs = cols;
  std::vector<std::vector<double>> t(static_cast<std::size_t>(rows), std::vector<double>(cols + 1, 0.0));
  std::vector<int> basis(static_cast<std::size_t>(rows));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      int k = i * static_cast<int>(m) + j;
      t[i][k] = 1.0;
      t[static_cast<std::size_t>(n + j)][k] = 1.0;
    }
  }
  for (int r = 0; r < rows; ++r) {
    t[r][vars + r] = 1.0;
    t[r][rhs] = r < n ? p[r] : q[r - n];
    basis[r] = vars + r;
  }

  auto pivot = [&](int pr, int pc) {
    double piv = t[pr][pc];
    for (double& v : t[pr]) v /= piv;
    for (int r = 0; r < rows; ++r) {
      if (r == pr) continue;
      double f = t[r][pc];
      if (f == 0.0) continue;
      for (int c = 0; c <= cols; ++c) t[r][c] -= f * t[pr][c];
    }
    basis[pr] = pc;
  };

  // Runs simplex for cost vector c over columns [0, allowed).
  auto run = [&](const std::vector<double>& c, int allowed) {
    while (true) {
      int enter = -1;
      for (int k = 0; k < allowed && enter < 0; ++k) {
        double z = c[k];
        for (int r = 0; r < rows; ++r) z -= c[basis[r]] * t[r][k];
        if (z < -kEps) enter = k;
      }
      if (enter < 0) return;
      int leave = -1;
      double best = 0.0;
      for (int r = 0; r < rows; ++r) {
        if (t[r][enter] <= kEps) continue;
        double ratio = t[r][rhs] / t[r][enter];
        if (leave < 0 || ratio < best - kEps ||
            (std::abs(ratio - best) <= kEps && basis[r] < basis[leave])) {
          leave = r;
          best = ratio;
        }
      }
      if (leave < 0) throw Error(ErrorCode::NumericalError, "transport LP reported unbounded");
      pivot(leave, enter);
    }
  };

  std::vector<double> phase1(cols, 0.0);
  for (int k = vars; k < cols; ++k) phase1[k] = 1.0;
  run(phase1, cols);
  double infeasibility = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (basis[r] >= vars) infeasibility += t[r][rhs];
  }
  if (infeasibility > 1e-9) throw Error(ErrorCode::NumericalError, "transport LP is infeasible");

  // Drive zero-level artificials out; rows with no structural entry are redundant.
  for (int r = 0; r < rows; ++r) {
    if (basis[r] < vars) continue;
    for (int k = 0; k < vars; ++k) {
      if (std::abs(t[r][k]) > 1e-9) {
        pivot(r, k);
        break;
      }
    }
  }

  std::vector<double> phase2(cols, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) phase2[i * static_cast<int>(m) + j] = cost(i, j);
  }
  run(phase2, vars);

  Matrix plan = Matrix::Zero(n, m);
  for (int r = 0; r < rows; ++r) {
    if (basis[r] < vars) {
      plan(basis[r] / m, basis[r] % m) = std::max(0.0, t[r][rhs]);
    }
  }
  return plan;
}

}  // namespace otalign::ot
