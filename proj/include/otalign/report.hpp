#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "backtest.hpp"
#include "baselines.hpp"
#include "csv.hpp"
#include "scoring.hpp"
#include "types.hpp"

namespace otalign::report {

inline double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

struct Distribution {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double p5 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

inline std::optional<Distribution> distribution(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  Distribution d;
  d.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - d.mean) * (v - d.mean);
    d.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  std::sort(values.begin(), values.end());
  d.p5 = backtest::percentile_sorted(values, 0.05);
  d.p50 = backtest::percentile_sorted(values, 0.50);
  d.p95 = backtest::percentile_sorted(values, 0.95);
  return d;
}

struct SimilarityRow {
  Kind kind;
  std::optional<Distribution> stats;
  std::size_t skipped = 0;  // stock-days missing a side of this kind
};

/// Cosine similarity between the English and foreign aggregate of each kind,
/// summarized over stock-days.
inline std::vector<SimilarityRow> similarity_table(const std::vector<scoring::StockDayFeatures>& features) {
  std::vector<SimilarityRow> rows;
  for (auto k : kKinds) {
    std::vector<double> sims;
    std::size_t skipped = 0;
    for (const auto& f : features) {
      const auto& e = f.at(Language::E, k);
      const auto& x = f.at(Language::F, k);
      if (e && x) {
        sims.push_back(cosine(*e, *x));
      } else {
        ++skipped;
      }
    }
    rows.push_back({k, distribution(std::move(sims)), skipped});
  }
  return rows;
}

inline void write_similarity_table(const std::string& path, const std::vector<SimilarityRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "kind,count,skipped,mean,std,p5,p50,p95\n";
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << (r.stats ? r.stats->count : 0) << ',' << r.skipped;
    if (r.stats) {
      out << ',' << csv::fmt(r.stats->mean) << ',' << csv::fmt(r.stats->std) << ',' << csv::fmt(r.stats->p5)
          << ',' << csv::fmt(r.stats->p50) << ',' << csv::fmt(r.stats->p95) << '\n';
    } else {
      out << ",nan,nan,nan,nan,nan\n";
    }
  }
}

/// Variables of the correlation table: realized return, then scores for
/// E/{A, UA, Full} and F/{A, UA, Full}.
inline constexpr std::size_t kCorrVars = 7;

inline std::array<std::string, kCorrVars> correlation_labels() {
  std::array<std::string, kCorrVars> labels;
  labels[0] = "Ret";
  std::size_t i = 1;
  for (auto l : kLanguages) {
    for (auto k : kKinds) labels[i++] = "Soft_" + std::string(to_string(l)) + "_" + std::string(to_string(k));
  }
  return labels;
}

using CorrelationMatrix = std::array<std::array<std::optional<double>, kCorrVars>, kCorrVars>;

inline constexpr std::size_t kMinCorrelationPairs = 3;

/// Pearson correlations on pairwise-complete (ticker, day) observations.
inline CorrelationMatrix correlation_matrix(const std::vector<scoring::ScoreRecord>& scores,
                                            const std::vector<scoring::ReturnObservation>& returns) {
  std::map<embed::BundleKey, std::array<std::optional<double>, kCorrVars>> table;
  for (const auto& r : returns) table[{r.ticker, r.trading_day}][0] = r.ret_oc;
  for (const auto& s : scores) {
    std::size_t col = 1 + index_of(s.language) * 3 + index_of(s.kind);
    table[{s.ticker, s.trading_day}][col] = s.score;
  }
  CorrelationMatrix c{};
  for (std::size_t a = 0; a < kCorrVars; ++a) {
    c[a][a] = 1.0;
    for (std::size_t b = a + 1; b < kCorrVars; ++b) {
      std::vector<std::pair<double, double>> xy;
      for (const auto& [key, row] : table) {
        if (row[a] && row[b]) xy.emplace_back(*row[a], *row[b]);
      }
      if (xy.size() < kMinCorrelationPairs) continue;
      double mx = 0, my = 0;
      for (auto [x, y] : xy) {
        mx += x;
        my += y;
      }
      mx /= static_cast<double>(xy.size());
      my /= static_cast<double>(xy.size());
      double sxy = 0, sxx = 0, syy = 0;
      for (auto [x, y] : xy) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
      }
      if (sxx > 0 && syy > 0) {
        double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
        c[a][b] = r;
        c[b][a] = r;
      }
    }
  }
  return c;
}

inline void write_correlation_matrix(const std::string& path, const CorrelationMatrix& c) {
  auto labels = correlation_labels();
  std::ofstream out(path, std::ios::binary);
  out << "var";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (std::size_t a = 0; a < kCorrVars; ++a) {
    out << labels[a];
    for (std::size_t b = 0; b < kCorrVars; ++b) out << ',' << (c[a][b] ? csv::fmt(*c[a][b]) : std::string("nan"));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Alignment coverage

struct AlignmentSummary {
  std::string ticker;
  Date trading_day{};
  std::size_t n = 0;  // English sentences
  std::size_t m = 0;  // foreign sentences
  std::size_t aligned_english = 0;
  std::size_t aligned_foreign = 0;
  std::size_t pairs = 0;
  bool converged = true;
};

struct YearCoverage {
  int year = 0;
  std::size_t stock_days = 0;
  double aligned_share_english = 0.0;  // mean over stock-days
  double aligned_share_foreign = 0.0;
  double unaligned_share_english = 0.0;
  double unaligned_share_foreign = 0.0;
  std::size_t with_aligned = 0;    // stock-days with at least one aligned pair
  std::size_t with_unaligned = 0;  // stock-days with at least one unaligned sentence
  std::size_t not_converged = 0;
};

inline std::vector<YearCoverage> coverage_series(const std::vector<AlignmentSummary>& records) {
  std::map<int, YearCoverage> years;
  for (const auto& r : records) {
    auto& y = years[year_of(r.trading_day)];
    y.year = year_of(r.trading_day);
    ++y.stock_days;
    y.aligned_share_english += r.n ? static_cast<double>(r.aligned_english) / static_cast<double>(r.n) : 0.0;
    y.aligned_share_foreign += r.m ? static_cast<double>(r.aligned_foreign) / static_cast<double>(r.m) : 0.0;
    if (r.pairs > 0) ++y.with_aligned;
    if (r.aligned_english < r.n || r.aligned_foreign < r.m) ++y.with_unaligned;
    if (!r.converged) ++y.not_converged;
  }
  std::vector<YearCoverage> out;
  for (auto& [year, y] : years) {
    double count = static_cast<double>(y.stock_days);
    y.aligned_share_english /= count;
    y.aligned_share_foreign /= count;
    y.unaligned_share_english = 1.0 - y.aligned_share_english;
    y.unaligned_share_foreign = 1.0 - y.aligned_share_foreign;
    out.push_back(y);
  }
  return out;
}

inline void write_coverage(const std::string& path, const std::vector<YearCoverage>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "year,stock_days,aligned_share_E,unaligned_share_E,aligned_share_F,unaligned_share_F,"
         "with_aligned,with_unaligned,not_converged\n";
  for (const auto& y : rows) {
    out << y.year << ',' << y.stock_days << ',' << csv::fmt(y.aligned_share_english) << ','
        << csv::fmt(y.unaligned_share_english) << ',' << csv::fmt(y.aligned_share_foreign) << ','
        << csv::fmt(y.unaligned_share_foreign) << ',' << y.with_aligned << ',' << y.with_unaligned << ','
        << y.not_converged << '\n';
  }
}

// ---------------------------------------------------------------------------
// Heatmap bundle

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  auto rows = j.get<std::vector<std::vector<double>>>();
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m.cols()) throw Error(ErrorCode::SchemaError, "ragged matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

struct Heatmap {
  std::string ticker;
  Date trading_day{};
  std::vector<std::string> english_sentences;
  std::vector<std::string> foreign_sentences;
  Matrix similarity;
  Matrix gamma;
  Matrix softmax;
  Matrix entmax15;
};

inline Heatmap heatmap_dump(const Matrix& xi, const Matrix& gamma, double temperature = 1.0) {
  Heatmap h;
  h.similarity = xi;
  h.gamma = gamma;
  h.softmax = ot::baseline_normalize(xi, ot::BaselineMethod::Softmax, temperature);
  h.entmax15 = ot::baseline_normalize(xi, ot::BaselineMethod::Entmax15, temperature);
  return h;
}

inline nlohmann::json to_json(const Heatmap& h) {
  return {{"ticker", h.ticker},
          {"trading_day", format_date(h.trading_day)},
          {"english_sentences", h.english_sentences},
          {"foreign_sentences", h.foreign_sentences},
          {"similarity", matrix_to_json(h.similarity)},
          {"gamma", matrix_to_json(h.gamma)},
          {"softmax", matrix_to_json(h.softmax)},
          {"entmax15", matrix_to_json(h.entmax15)}};
}

inline Heatmap heatmap_from_json(const nlohmann::json& j) {
  Heatmap h;
  h.ticker = j.at("ticker").get<std::string>();
  h.trading_day = parse_date(j.at("trading_day").get<std::string>());
  h.english_sentences = j.at("english_sentences").get<std::vector<std::string>>();
  h.foreign_sentences = j.at("foreign_sentences").get<std::vector<std::string>>();
  h.similarity = matrix_from_json(j.at("similarity"));
  h.gamma = matrix_from_json(j.at("gamma"));
  h.softmax = matrix_from_json(j.at("softmax"));
  h.entmax15 = matrix_from_json(j.at("entmax15"));
  return h;
}

}  // namespace otalign::report
