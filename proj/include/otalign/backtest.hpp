#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "scoring.hpp"
#include "timeutil.hpp"
#include "types.hpp"

namespace otalign::backtest {

struct BacktestParams {
  int n_quantiles = 5;
  std::size_t min_stocks = 20;
  double annualization_days = 252.0;
};

struct DailyPortfolio {
  Date trading_day{};
  Language language = Language::E;
  Kind kind = Kind::Full;
  std::vector<std::string> long_set;   // top bucket, best score first
  std::vector<std::string> short_set;  // bottom bucket
  double ret_long = 0.0;
  double ret_short = 0.0;
  double ls = 0.0;
  std::size_t stocks = 0;
  bool uneven = false;               // stock count not divisible by the quantile count
  bool degenerate_ranking = false;   // tied scores straddle a long/short bucket boundary
};

/// Ranks each (language, kind, day) cross-section by score (ties by ticker),
/// splits it into n_quantiles buckets as evenly as possible with the
/// remainder given one each to the top buckets, and returns the
/// equal-weighted top-minus-bottom return. Days with fewer than min_stocks
/// scored stocks that have a realized return are skipped.
inline std::vector<DailyPortfolio> form_portfolios(const std::vector<scoring::ScoreRecord>& scores,
                                                   const std::vector<scoring::ReturnObservation>& returns,
                                                   const BacktestParams& params = {}) {
  if (params.n_quantiles < 2) throw Error(ErrorCode::ParameterError, "need at least 2 quantiles");
  std::map<embed::BundleKey, double> ret;
  for (const auto& r : returns) ret.emplace(embed::BundleKey{r.ticker, r.trading_day}, r.ret_oc);

  using Slot = std::tuple<Language, Kind, std::chrono::sys_days>;
  std::map<Slot, std::vector<std::pair<double, const scoring::ScoreRecord*>>> days;
  std::set<std::tuple<Language, Kind, std::chrono::sys_days, std::string>> seen;
  for (const auto& s : scores) {
    std::chrono::sys_days day{s.trading_day};
    if (!seen.emplace(s.language, s.kind, day, s.ticker).second) {
      throw Error(ErrorCode::DataError, "duplicate score for " + s.ticker + " " + format_date(s.trading_day));
    }
    auto it = ret.find(embed::BundleKey{s.ticker, s.trading_day});
    if (it == ret.end()) continue;
    days[{s.language, s.kind, day}].emplace_back(it->second, &s);
  }

  const auto q = static_cast<std::size_t>(params.n_quantiles);
  std::vector<DailyPortfolio> out;
  for (auto& [slot, rows] : days) {
    const std::size_t N = rows.size();
    if (N < params.min_stocks || N < q) continue;
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      if (a.second->score != b.second->score) return a.second->score > b.second->score;
      return a.second->ticker < b.second->ticker;
    });
    const std::size_t base = N / q, extra = N % q;
    const std::size_t top_size = base + (extra > 0 ? 1 : 0);
    const std::size_t bottom_size = base + (q - 1 < extra ? 1 : 0);

    DailyPortfolio p;
    p.language = std::get<0>(slot);
    p.kind = std::get<1>(slot);
    p.trading_day = Date{std::get<2>(slot)};
    p.stocks = N;
    p.uneven = extra > 0;
    auto score_at = [&](std::size_t i) { return rows[i].second->score; };
    p.degenerate_ranking = score_at(top_size - 1) == score_at(top_size) ||
                           score_at(N - bottom_size - 1) == score_at(N - bottom_size);
    double sum_long = 0.0, sum_short = 0.0;
    for (std::size_t i = 0; i < top_size; ++i) {
      p.long_set.push_back(rows[i].second->ticker);
      sum_long += rows[i].first;
    }
    for (std::size_t i = N - bottom_size; i < N; ++i) {
      p.short_set.push_back(rows[i].second->ticker);
      sum_short += rows[i].first;
    }
    p.ret_long = sum_long / static_cast<double>(top_size);
    p.ret_short = sum_short / static_cast<double>(bottom_size);
    p.ls = p.ret_long - p.ret_short;
    out.push_back(std::move(p));
  }
  return out;
}

struct StrategyStats {
  double geo_mean = 0.0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (T - 1)
  double p5 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  std::optional<double> sharpe_daily;
  std::optional<double> sharpe_annual;
  std::size_t days = 0;
};

/// Linear-interpolation percentile of sorted data, q in [0, 1].
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  double h = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Statistics of a long-short series; Sharpe fields are left empty when the
/// standard deviation is zero.
inline StrategyStats describe_series(const std::vector<double>& ls, double annualization_days = 252.0) {
  if (ls.size() < 2) throw Error(ErrorCode::InsufficientData, "need at least two daily returns");
  StrategyStats s;
  s.days = ls.size();
  const double T = static_cast<double>(ls.size());
  double log_growth = 0.0, sum = 0.0;
  for (double r : ls) {
    if (!(r > -1.0) || !std::isfinite(r)) throw Error(ErrorCode::DataError, "long-short return must be finite and > -1");
    log_growth += std::log1p(r);
    sum += r;
  }
  s.geo_mean = std::expm1(log_growth / T);
  s.mean = sum / T;
  double ss = 0.0;
  for (double r : ls) ss += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(ss / (T - 1.0));
  std::vector<double> sorted = ls;
  std::sort(sorted.begin(), sorted.end());
  s.p5 = percentile_sorted(sorted, 0.05);
  s.p50 = percentile_sorted(sorted, 0.50);
  s.p95 = percentile_sorted(sorted, 0.95);
  if (s.std > 0.0) {
    s.sharpe_daily = s.mean / s.std;
    s.sharpe_annual = *s.sharpe_daily * std::sqrt(annualization_days);
  }
  return s;
}

/// As describe_series, but a zero standard deviation is an error.
inline StrategyStats strategy_stats(const std::vector<double>& ls, double annualization_days = 252.0) {
  auto s = describe_series(ls, annualization_days);
  if (!s.sharpe_daily) throw Error(ErrorCode::UndefinedSharpe, "long-short series has zero standard deviation");
  return s;
}

/// Day-ordered LS series per (language, kind).
inline std::map<std::pair<Language, Kind>, std::vector<double>> ls_series(
    const std::vector<DailyPortfolio>& portfolios) {
  std::vector<const DailyPortfolio*> ordered;
  for (const auto& p : portfolios) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) {
    return std::chrono::sys_days{a->trading_day} < std::chrono::sys_days{b->trading_day};
  });
  std::map<std::pair<Language, Kind>, std::vector<double>> out;
  for (auto* p : ordered) out[{p->language, p->kind}].push_back(p->ls);
  return out;
}

inline void write_daily(const std::string& path, const std::vector<DailyPortfolio>& portfolios) {
  std::ofstream out(path, std::ios::binary);
  out << "date,language,kind,ls,ret_long,ret_short,stocks,uneven,degenerate_ranking\n";
  for (const auto& p : portfolios) {
    out << format_date(p.trading_day) << ',' << to_string(p.language) << ',' << to_string(p.kind) << ','
        << csv::fmt(p.ls) << ',' << csv::fmt(p.ret_long) << ',' << csv::fmt(p.ret_short) << ',' << p.stocks
        << ',' << (p.uneven ? 1 : 0) << ',' << (p.degenerate_ranking ? 1 : 0) << '\n';
  }
}

struct SummaryRow {
  Language language;
  Kind kind;
  std::optional<StrategyStats> stats;  // empty when the series is too short
};

inline std::vector<SummaryRow> summarize(const std::vector<DailyPortfolio>& portfolios,
                                         double annualization_days = 252.0) {
  std::vector<SummaryRow> rows;
  auto series = ls_series(portfolios);
  for (auto k : kKinds) {
    for (auto l : kLanguages) {
      SummaryRow row{l, k, std::nullopt};
      auto it = series.find({l, k});
      if (it != series.end() && it->second.size() >= 2) row.stats = describe_series(it->second, annualization_days);
      rows.push_back(row);
    }
  }
  return rows;
}

/// Columns follow the strategy summary layout: Alignment, Lang, Geo Mean,
/// Mean, Std, 5%, 50%, 95%, Sharpe, Ann. Sharpe (plus the day count).
inline void write_summary(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "alignment,lang,geo_mean,mean,std,p5,p50,p95,sharpe,ann_sharpe,days\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv::fmt(*v) : std::string("nan"); };
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << to_string(r.language) << ',';
    if (!r.stats) {
      out << "nan,nan,nan,nan,nan,nan,nan,nan,0\n";
      continue;
    }
    const auto& s = *r.stats;
    out << csv::fmt(s.geo_mean) << ',' << csv::fmt(s.mean) << ',' << csv::fmt(s.std) << ',' << csv::fmt(s.p5)
        << ',' << csv::fmt(s.p50) << ',' << csv::fmt(s.p95) << ',' << opt(s.sharpe_daily) << ','
        << opt(s.sharpe_annual) << ',' << s.days << '\n';
  }
}

}  // namespace otalign::backtest
