#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aggregate.hpp"
#include "csv.hpp"
#include "embed_io.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "ridge.hpp"
#include "timeutil.hpp"
#include "types.hpp"

namespace otalign::scoring {

using embed::BundleKey;

struct ReturnObservation {
  std::string ticker;
  Date trading_day{};
  double ret_oc = 0.0;  // open-to-close simple return
};

/// Aggregated vectors of one stock-day, [language][kind]; absent slots are nullopt.
struct StockDayFeatures {
  BundleKey key;
  std::array<std::array<std::optional<Vector>, 3>, 2> vectors;

  const std::optional<Vector>& at(Language l, Kind k) const { return vectors[index_of(l)][index_of(k)]; }
  std::optional<Vector>& at(Language l, Kind k) { return vectors[index_of(l)][index_of(k)]; }
};

inline StockDayFeatures features_from(const BundleKey& key, const aggregate::AggregatedEmbeddings& agg) {
  StockDayFeatures f{key, {}};
  for (auto l : kLanguages) {
    for (auto k : kKinds) f.at(l, k) = agg.at(l, k).vector;
  }
  return f;
}

struct RidgeModel {
  Vector weights;
  double lambda = 0.0;
  int window_start = 0;  // first training calendar year
  int window_end = 0;    // last training calendar year
  int scoring_year = 0;
  Language language = Language::E;
  Kind kind = Kind::Full;
  std::size_t rows = 0;
  Date last_training_day{};
};

struct ScoreRecord {
  std::string ticker;
  Date trading_day{};
  Language language = Language::E;
  Kind kind = Kind::Full;
  double score = 0.0;
  int model_window_end = 0;
  Date model_last_training_day{};
};

struct SkippedCell {
  int scoring_year = 0;
  Language language = Language::E;
  Kind kind = Kind::Full;
  std::size_t rows = 0;
  std::string reason;
};

struct ScoringParams {
  std::vector<double> lambda_grid = ridge::default_lambda_grid();
  int folds = 5;
  int window_years = 5;  // train on years y - window_years .. y, score y + 1
  int first_train_year = 2012;
  std::optional<int> last_year;  // defaults to the last feature year
  std::size_t min_train_rows = 100;
};

struct ScoringResult {
  std::vector<ScoreRecord> scores;
  std::vector<RidgeModel> models;
  std::vector<SkippedCell> skipped;
};

/// One ridge model per (scoring year Y, language, kind), trained on the
/// present feature vectors of calendar years [Y-1-window_years, Y-1] joined
/// with realized returns, then applied to every present vector of year Y.
inline ScoringResult rolling_scores(const std::vector<StockDayFeatures>& features,
                                    const std::vector<ReturnObservation>& returns,
                                    const ScoringParams& params, int workers = 1) {
  std::map<BundleKey, double> ret;
  for (const auto& r : returns) {
    if (!ret.emplace(BundleKey{r.ticker, r.trading_day}, r.ret_oc).second) {
      throw Error(ErrorCode::DataError, "duplicate return for " + r.ticker + " " + format_date(r.trading_day));
    }
  }

  // Time order (day, ticker) so CV folds are contiguous in time.
  std::vector<const StockDayFeatures*> ordered;
  for (const auto& f : features) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) {
    auto da = std::chrono::sys_days{a->key.trading_day}, db = std::chrono::sys_days{b->key.trading_day};
    return da != db ? da < db : a->key.ticker < b->key.ticker;
  });

  int last_year = params.first_train_year;
  for (auto* f : ordered) last_year = std::max(last_year, year_of(f->key.trading_day));
  if (params.last_year) last_year = *params.last_year;

  struct Cell {
    int year;
    Language language;
    Kind kind;
  };
  std::vector<Cell> cells;
  for (int y = params.first_train_year + 1; y <= last_year; ++y) {
    for (auto l : kLanguages) {
      for (auto k : kKinds) cells.push_back({y, l, k});
    }
  }

  struct CellOutput {
    std::optional<RidgeModel> model;
    std::optional<SkippedCell> skipped;
    std::vector<ScoreRecord> scores;
  };
  std::vector<CellOutput> outputs(cells.size());

  parallel_for(cells.size(), workers, [&](std::size_t c) {
    const Cell& cell = cells[c];
    const int lo = cell.year - 1 - params.window_years, hi = cell.year - 1;
    std::vector<const StockDayFeatures*> train;
    std::vector<double> target;
    for (auto* f : ordered) {
      int y = year_of(f->key.trading_day);
      if (y < lo || y > hi || !f->at(cell.language, cell.kind)) continue;
      auto it = ret.find(f->key);
      if (it == ret.end()) continue;
      train.push_back(f);
      target.push_back(it->second);
    }
    CellOutput& out = outputs[c];
    if (train.size() < params.min_train_rows || train.size() < static_cast<std::size_t>(params.folds)) {
      out.skipped = SkippedCell{cell.year, cell.language, cell.kind, train.size(),
                                train.empty() ? "ModelSkipped: empty training window"
                                              : "ModelSkipped: too few training rows"};
      return;
    }
    const auto dim = train.front()->at(cell.language, cell.kind)->size();
    Matrix X(static_cast<Eigen::Index>(train.size()), dim);
    for (std::size_t r = 0; r < train.size(); ++r) {
      const Vector& v = *train[r]->at(cell.language, cell.kind);
      if (v.size() != dim) throw Error(ErrorCode::SchemaError, "feature dims differ within a model cell");
      X.row(static_cast<Eigen::Index>(r)) = v.transpose();
    }
    Vector y = Eigen::Map<const Vector>(target.data(), static_cast<Eigen::Index>(target.size()));

    auto cv = ridge::cross_validate_lambda(X, y, params.lambda_grid, params.folds);
    RidgeModel model;
    model.weights = ridge::fit_ridge(X, y, cv.lambda);
    model.lambda = cv.lambda;
    model.window_start = lo;
    model.window_end = hi;
    model.scoring_year = cell.year;
    model.language = cell.language;
    model.kind = cell.kind;
    model.rows = train.size();
    model.last_training_day = train.back()->key.trading_day;

    for (auto* f : ordered) {
      if (year_of(f->key.trading_day) != cell.year) continue;
      const auto& v = f->at(cell.language, cell.kind);
      if (!v) continue;
      out.scores.push_back(ScoreRecord{f->key.ticker, f->key.trading_day, cell.language, cell.kind,
                                       v->dot(model.weights), hi, model.last_training_day});
    }
    out.model = std::move(model);
  });

  ScoringResult result;
  for (auto& o : outputs) {
    if (o.model) result.models.push_back(std::move(*o.model));
    if (o.skipped) result.skipped.push_back(std::move(*o.skipped));
    for (auto& s : o.scores) result.scores.push_back(std::move(s));
  }
  std::stable_sort(result.scores.begin(), result.scores.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
    auto da = std::chrono::sys_days{a.trading_day}, db = std::chrono::sys_days{b.trading_day};
    if (da != db) return da < db;
    if (a.ticker != b.ticker) return a.ticker < b.ticker;
    if (a.language != b.language) return a.language < b.language;
    return a.kind < b.kind;
  });
  return result;
}

/// Number of scores whose model saw any data from the score's own year or later.
inline std::size_t count_lookahead_violations(const std::vector<ScoreRecord>& scores) {
  std::size_t bad = 0;
  for (const auto& s : scores) {
    int year = year_of(s.trading_day);
    bool window_ok = s.model_window_end < year;
    bool day_ok = std::chrono::sys_days{s.model_last_training_day} <
                  std::chrono::sys_days{Date{std::chrono::year{year}, std::chrono::January, std::chrono::day{1}}};
    if (!window_ok || !day_ok) ++bad;
  }
  return bad;
}

// ---------------------------------------------------------------------------
// CSV / JSON

inline std::vector<ReturnObservation> read_returns(const std::string& path) {
  auto table = csv::read(path);
  auto ticker = table.column("ticker"), date = table.column("date");
  std::size_t value = table.header.size() > 2 ? 2 : 1;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == "ret_oc" || table.header[i] == "return") value = i;
  }
  std::vector<ReturnObservation> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    ReturnObservation o{row[ticker], parse_date(row[date]), csv::to_double(row[value])};
    if (!(o.ret_oc > -1.0) || !std::isfinite(o.ret_oc)) {
      throw Error(ErrorCode::DataError,
                  path + ":" + std::to_string(table.line_numbers[r]) + ": return must be finite and > -1");
    }
    out.push_back(std::move(o));
  }
  return out;
}

inline void write_returns(const std::string& path, const std::vector<ReturnObservation>& returns) {
  std::ofstream out(path, std::ios::binary);
  out << "ticker,date,ret_oc\n";
  for (const auto& r : returns) out << r.ticker << ',' << format_date(r.trading_day) << ',' << csv::fmt(r.ret_oc) << '\n';
}

inline void write_scores(const std::string& path, const std::vector<ScoreRecord>& scores) {
  std::ofstream out(path, std::ios::binary);
  out << "ticker,date,language,kind,score\n";
  for (const auto& s : scores) {
    out << s.ticker << ',' << format_date(s.trading_day) << ',' << to_string(s.language) << ','
        << to_string(s.kind) << ',' << csv::fmt(s.score) << '\n';
  }
}

inline std::vector<ScoreRecord> read_scores(const std::string& path) {
  auto table = csv::read(path);
  auto ticker = table.column("ticker"), date = table.column("date"), lang = table.column("language"),
       kind = table.column("kind"), score = table.column("score");
  std::vector<ScoreRecord> out;
  for (const auto& row : table.rows) {
    ScoreRecord s;
    s.ticker = row[ticker];
    s.trading_day = parse_date(row[date]);
    s.language = parse_language(row[lang]);
    s.kind = parse_kind(row[kind]);
    s.score = csv::to_double(row[score]);
    out.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::json to_json(const RidgeModel& m) {
  return {{"scoring_year", m.scoring_year},
          {"language", std::string(to_string(m.language))},
          {"kind", std::string(to_string(m.kind))},
          {"lambda", m.lambda},
          {"window_start", m.window_start},
          {"window_end", m.window_end},
          {"rows", m.rows},
          {"last_training_day", format_date(m.last_training_day)},
          {"weights", std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size())}};
}

}  // namespace otalign::scoring
