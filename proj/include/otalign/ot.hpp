#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "embed_io.hpp"
#include "error.hpp"
#include "types.hpp"

namespace otalign::ot {

/// Cosine similarities and the transport cost derived from them.
struct CostMatrix {
  Matrix values;      // min-max scaled 1 - similarity, in [0, 1]
  Matrix similarity;  // raw cosine similarity xi
  bool degenerate = false;  // max - min below 1e-12, values set to zero
};

inline constexpr double kDegenerateRange = 1e-12;

/// Min-max scales a cost matrix over all of its entries. A constant matrix
/// carries no ordering information and maps to all zeros.
inline Matrix minmax_scale(const Matrix& raw, bool* degenerate = nullptr) {
  if (raw.size() == 0) return raw;
  double lo = raw.minCoeff();
  double hi = raw.maxCoeff();
  bool flat = !(hi - lo >= kDegenerateRange);
  if (degenerate) *degenerate = flat;
  if (flat) return Matrix::Zero(raw.rows(), raw.cols());
  Matrix out = (raw.array() - lo) / (hi - lo);
  return out;
}

inline CostMatrix cost_matrix(const Matrix& english, const Matrix& foreign) {
  if (english.cols() != foreign.cols()) {
    throw Error(ErrorCode::SchemaError, "embedding dims differ between languages");
  }
  if (english.rows() == 0 || foreign.rows() == 0) {
    throw Error(ErrorCode::SchemaError, "cost matrix needs at least one sentence per side");
  }
  CostMatrix c;
  c.similarity = english * foreign.transpose();
  Matrix raw = (1.0 - c.similarity.array()).matrix();
  c.values = minmax_scale(raw, &c.degenerate);
  return c;
}

inline CostMatrix cost_matrix(const embed::EmbeddingMatrixPair& pair) {
  return cost_matrix(pair.english, pair.foreign);
}

// ---------------------------------------------------------------------------
// Sinkhorn

struct SinkhornParams {
  double epsilon = 0.05;
  double tol = 1e-9;
  int max_iter = 10'000;
};

struct TransportPlan {
  Matrix gamma;
  Vector row_marginal;
  Vector col_marginal;
  double epsilon = 0.0;
  int iterations = 0;
  bool converged = false;
  double marginal_error = 0.0;  // max over row and column marginal violations
};

/// Largest absolute violation of either marginal.
inline double marginal_violation(const Matrix& gamma, const Vector& p, const Vector& q) {
  double rows = (gamma.rowwise().sum() - p).cwiseAbs().maxCoeff();
  double cols = (gamma.colwise().sum().transpose() - q).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

/// Entropic OT between marginals p and q by log-domain Sinkhorn:
/// gamma_ij = exp((f_i + g_j - C_ij) / eps). After each g-update the column
/// marginals hold exactly, and the next f-update yields the row violation
/// without forming gamma, so the stopping test costs nothing extra.
inline TransportPlan sinkhorn(const Matrix& cost, const Vector& p, const Vector& q,
                              const SinkhornParams& params = {}) {
  const Eigen::Index n = cost.rows(), m = cost.cols();
  if (n == 0 || m == 0) throw Error(ErrorCode::SchemaError, "empty cost matrix");
  if (p.size() != n || q.size() != m) throw Error(ErrorCode::SchemaError, "marginal sizes do not match cost");
  if (!(params.epsilon > 0.0)) throw Error(ErrorCode::ParameterError, "epsilon must be > 0");
  if (!(params.tol > 0.0) || params.max_iter < 1) {
    throw Error(ErrorCode::ParameterError, "tol must be > 0 and max_iter >= 1");
  }
  if (!cost.allFinite()) throw Error(ErrorCode::NumericalError, "cost matrix has non-finite entries");
  if (!(p.array() > 0.0).all() || !(q.array() > 0.0).all()) {
    throw Error(ErrorCode::ParameterError, "marginals must be strictly positive");
  }

  const double eps = params.epsilon;
  const Eigen::ArrayXd log_p = p.array().log();
  const Eigen::ArrayXd log_q = q.array().log();
  const Eigen::ArrayXXd neg_cost = -cost.array() / eps;

  Eigen::ArrayXd f = Eigen::ArrayXd::Zero(n);  // potentials scaled by 1/eps
  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(m);
  Eigen::ArrayXd f_new(n);
  Eigen::ArrayXXd work(n, m);

  auto update_f = [&] {
    work = neg_cost.rowwise() + g.transpose();
    Eigen::ArrayXd mx = work.rowwise().maxCoeff();
    f_new = log_p - mx - (work.colwise() - mx).exp().rowwise().sum().log();
  };
  auto update_g = [&] {
    work = neg_cost.colwise() + f;
    Eigen::ArrayXd mx = work.colwise().maxCoeff().transpose();
    g = log_q - mx - (work.rowwise() - mx.transpose()).exp().colwise().sum().transpose().log();
  };

  TransportPlan plan;
  plan.row_marginal = p;
  plan.col_marginal = q;
  plan.epsilon = eps;

  for (int it = 1; it <= params.max_iter; ++it) {
    update_f();
    plan.iterations = it;
    if (it > 1) {
      // rows of the current plan sum to p_i * exp(f_i - f_new_i)
      double err = (p.array() * ((f - f_new).exp() - 1.0)).abs().maxCoeff();
      if (!std::isfinite(err)) throw Error(ErrorCode::NumericalError, "Sinkhorn diverged");
      if (err <= params.tol) {
        plan.converged = true;
        break;
      }
    }
    f = f_new;
    update_g();
  }

  plan.gamma = ((neg_cost.colwise() + f).rowwise() + g.transpose()).exp().matrix();
  if (!plan.gamma.allFinite()) throw Error(ErrorCode::NumericalError, "transport plan is not finite");
  plan.marginal_error = marginal_violation(plan.gamma, p, q);
  return plan;
}

inline Vector uniform_marginal(Eigen::Index size) {
  return Vector::Constant(size, 1.0 / static_cast<double>(size));
}

/// Uniform marginals 1/n and 1/m.
inline TransportPlan sinkhorn(const Matrix& cost, const SinkhornParams& params = {}) {
  return sinkhorn(cost, uniform_marginal(cost.rows()), uniform_marginal(cost.cols()), params);
}

inline TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornParams& params = {}) {
  return sinkhorn(cost.values, params);
}

inline double transport_cost(const Matrix& cost, const Matrix& gamma) {
  return (cost.array() * gamma.array()).sum();
}

// ---------------------------------------------------------------------------
// Alignment extraction

/// Number of entries counted as the "top fraction" of a column with `rows`
/// entries; at least one.
inline Eigen::Index top_count(double top_frac, Eigen::Index rows) {
  // shave a few ulps so exact products like 0.05 * 20 do not round up to 2
  double raw = top_frac * static_cast<double>(rows);
  auto k = static_cast<Eigen::Index>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<Eigen::Index>(k, 1, rows);
}

/// Marks (i, j*) where j* is row i's argmax (smallest index on ties) and
/// gamma_{i j*} is among the top_count largest entries of column j*
/// (entries tied with the cutoff qualify).
inline Mask directional_alignment(const Matrix& gamma, double top_frac = 0.05) {
  if (!(top_frac > 0.0 && top_frac <= 1.0)) {
    throw Error(ErrorCode::ParameterError, "top_frac must be in (0, 1]");
  }
  const Eigen::Index n = gamma.rows(), m = gamma.cols();
  Mask out = Mask::Zero(n, m);
  if (n == 0 || m == 0) return out;
  const Eigen::Index k = top_count(top_frac, n);

  std::vector<double> cutoff(static_cast<std::size_t>(m), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> column(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m; ++j) {
      if (gamma(i, j) > gamma(i, best)) best = j;
    }
    auto& cut = cutoff[static_cast<std::size_t>(best)];
    if (std::isnan(cut)) {
      for (Eigen::Index r = 0; r < n; ++r) column[static_cast<std::size_t>(r)] = gamma(r, best);
      std::nth_element(column.begin(), column.begin() + (k - 1), column.end(), std::greater<>());
      cut = column[static_cast<std::size_t>(k - 1)];
    }
    if (gamma(i, best) >= cut) out(i, best) = 1;
  }
  return out;
}

struct AlignmentMatrix {
  Mask mask;      // n x m final alignment
  Mask forward;   // n x m
  Mask backward;  // m x n
  double xi_thres = 0.6;
};

/// mask = forward .* backward^T .* (xi >= xi_thres), elementwise.
inline AlignmentMatrix intersect_alignments(const Mask& forward, const Mask& backward, const Matrix& xi,
                                            double xi_thres = 0.6) {
  if (forward.rows() != xi.rows() || forward.cols() != xi.cols() || backward.rows() != xi.cols() ||
      backward.cols() != xi.rows()) {
    throw Error(ErrorCode::SchemaError, "alignment shapes are inconsistent");
  }
  AlignmentMatrix a{Mask::Zero(xi.rows(), xi.cols()), forward, backward, xi_thres};
  for (Eigen::Index j = 0; j < xi.cols(); ++j) {
    for (Eigen::Index i = 0; i < xi.rows(); ++i) {
      a.mask(i, j) = (forward(i, j) && backward(j, i) && xi(i, j) >= xi_thres) ? 1 : 0;
    }
  }
  return a;
}

struct AlignmentParams {
  SinkhornParams sinkhorn;
  double top_frac = 0.05;
  double xi_thres = 0.6;
};

struct AlignedPair {
  Eigen::Index english = 0;
  Eigen::Index foreign = 0;
  double similarity = 0.0;
  double gamma = 0.0;
};

struct AlignmentResult {
  CostMatrix cost;
  TransportPlan forward_plan;   // n x m
  TransportPlan backward_plan;  // m x n, solved on the transposed cost
  AlignmentMatrix alignment;

  bool converged() const { return forward_plan.converged && backward_plan.converged; }

  std::vector<AlignedPair> pairs() const {
    std::vector<AlignedPair> out;
    const Mask& mask = alignment.mask;
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
      for (Eigen::Index j = 0; j < mask.cols(); ++j) {
        if (mask(i, j)) out.push_back({i, j, cost.similarity(i, j), forward_plan.gamma(i, j)});
      }
    }
    return out;
  }
};

/// Full per-stock-day alignment: cost, transport plans in both directions,
/// directional top-fraction masks, and the similarity gate.
inline AlignmentResult align(const Matrix& english, const Matrix& foreign, const AlignmentParams& params = {}) {
  AlignmentResult r;
  r.cost = cost_matrix(english, foreign);
  r.forward_plan = sinkhorn(r.cost.values, params.sinkhorn);
  Matrix transposed = r.cost.values.transpose();
  r.backward_plan = sinkhorn(transposed, params.sinkhorn);
  Mask fwd = directional_alignment(r.forward_plan.gamma, params.top_frac);
  Mask bwd = directional_alignment(r.backward_plan.gamma, params.top_frac);
  r.alignment = intersect_alignments(fwd, bwd, r.cost.similarity, params.xi_thres);
  return r;
}

inline AlignmentResult align(const embed::EmbeddingMatrixPair& pair, const AlignmentParams& params = {}) {
  return align(pair.english, pair.foreign, params);
}

}  // namespace otalign::ot
