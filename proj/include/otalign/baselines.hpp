#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "ot.hpp"
#include "types.hpp"

namespace otalign::ot {

enum class BaselineMethod { Softmax, Entmax15 };

inline BaselineMethod parse_baseline(std::string_view s) {
  if (s == "softmax") return BaselineMethod::Softmax;
  if (s == "entmax15") return BaselineMethod::Entmax15;
  throw Error(ErrorCode::ParameterError, "unknown baseline '" + std::string(s) + "'");
}

inline Vector softmax(const Vector& z) {
  Vector e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

/// Exact 1.5-entmax via the sort-based threshold: p = [z/2 - tau]_+^2 with
/// tau chosen so that p sums to one.
inline Vector entmax15(const Vector& z) {
  const Eigen::Index d = z.size();
  Vector x = z.array() / 2.0;
  x.array() -= x.maxCoeff();
  std::vector<double> sorted(x.data(), x.data() + d);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  double tau = 0.0;
  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index k = 1; k <= d; ++k) {
    double v = sorted[static_cast<std::size_t>(k - 1)];
    sum += v;
    sum_sq += v * v;
    double kk = static_cast<double>(k);
    double mean = sum / kk;
    double delta = (1.0 - (sum_sq - kk * mean * mean)) / kk;
    double tau_k = mean - std::sqrt(std::max(delta, 0.0));
    if (tau_k <= v) {
      tau = tau_k;
    } else {
      break;
    }
  }
  Vector p = (x.array() - tau).max(0.0).square();
  return p / p.sum();
}

/// Row-wise normalization of a similarity matrix at the given temperature.
inline Matrix baseline_normalize(const Matrix& xi, BaselineMethod method, double temperature = 1.0) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::ParameterError, "temperature must be > 0");
  if (!xi.allFinite()) throw Error(ErrorCode::NumericalError, "similarity matrix has non-finite entries");
  Matrix out(xi.rows(), xi.cols());
  for (Eigen::Index i = 0; i < xi.rows(); ++i) {
    Vector z = xi.row(i).transpose() / temperature;
    out.row(i) = (method == BaselineMethod::Softmax ? softmax(z) : entmax15(z)).transpose();
  }
  return out;
}

/// Selects the ceil(frac * entries) largest entries of the whole matrix;
/// entries tied with the cutoff are included.
inline Mask global_top_fraction(const Matrix& values, double frac = 0.05) {
  if (!(frac > 0.0 && frac <= 1.0)) throw Error(ErrorCode::ParameterError, "frac must be in (0, 1]");
  Mask out = Mask::Zero(values.rows(), values.cols());
  if (values.size() == 0) return out;
  Eigen::Index k = top_count(frac, values.size());
  std::vector<double> all(values.data(), values.data() + values.size());
  std::nth_element(all.begin(), all.begin() + (k - 1), all.end(), std::greater<>());
  double cut = all[static_cast<std::size_t>(k - 1)];
  out = (values.array() >= cut).cast<std::uint8_t>();
  return out;
}

inline Eigen::Index count_nonzero(const Mask& m) { return m.cast<Eigen::Index>().sum(); }

inline Eigen::Index count_above(const Matrix& values, double threshold) {
  return (values.array() > threshold).count();
}

}  // namespace otalign::ot
