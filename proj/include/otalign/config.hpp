#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "backtest.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "ot.hpp"
#include "scoring.hpp"

namespace otalign::config {

namespace fs = std::filesystem;

struct Paths {
  std::optional<fs::path> articles;
  std::optional<fs::path> calendar;
  std::optional<fs::path> embeddings;
  std::optional<fs::path> returns;
  fs::path output_dir = "out";
};

struct CorpusSettings {
  int min_ticker_score = 75;
  double update_window_hours = 24;
  std::string english_language = "en";
  std::string foreign_language = "ja";
  corpus::CleaningRules rules;
};

struct AlignmentSettings {
  ot::AlignmentParams params;
  bool dump_matrices = false;
  std::vector<std::string> dump_filter;  // "TICKER@YYYY-MM-DD"; empty dumps every stock-day
  double baseline_temperature = 1.0;
};

struct ScoringSettings {
  scoring::ScoringParams params;
  int eval_start = 2018;
  int eval_end = 2024;
};

struct PipelineConfig {
  Paths paths;
  CorpusSettings corpus;
  AlignmentSettings alignment;
  ScoringSettings scoring;
  backtest::BacktestParams backtest;
  std::size_t dim = 768;
  int workers = 0;  // 0 = hardware concurrency
};

struct Validation {
  PipelineConfig config;
  std::vector<std::string> errors;    // "field.path: message"
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
};

namespace detail {

class Reader {
 public:
  Reader(Validation& v, fs::path base) : v_(v), base_(std::move(base)) {}

  /// Visits a section object, warning on keys not in `known`.
  const nlohmann::json* section(const nlohmann::json& root, const std::string& name,
                                const std::set<std::string>& known) {
    if (!root.contains(name)) return nullptr;
    const auto& s = root.at(name);
    if (!s.is_object()) {
      v_.errors.push_back(name + ": expected an object");
      return nullptr;
    }
    for (const auto& [key, _] : s.items()) {
      if (!known.count(key)) v_.warnings.push_back(name + "." + key + ": unknown key ignored");
    }
    return &s;
  }

  template <typename T>
  void read(const nlohmann::json* obj, const std::string& section, const std::string& key, T& dst) {
    if (!obj || !obj->contains(key) || obj->at(key).is_null()) return;
    try {
      dst = obj->at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      v_.errors.push_back(field(section, key) + ": wrong type");
    }
  }

  void read_path(const nlohmann::json* obj, const std::string& key, std::optional<fs::path>& dst, bool must_exist) {
    std::string s;
    if (!obj || !obj->contains(key) || obj->at(key).is_null()) return;
    read(obj, "paths", key, s);
    if (s.empty()) return;
    fs::path p = fs::path(s).is_absolute() ? fs::path(s) : base_ / s;
    if (must_exist && !fs::exists(p)) {
      v_.errors.push_back("paths." + key + ": file not found: " + p.string());
    }
    dst = p;
  }

  void check(bool ok, const std::string& section, const std::string& key, const std::string& msg) {
    if (!ok) v_.errors.push_back(field(section, key) + ": " + msg);
  }

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_ / p; }

 private:
  static std::string field(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }
  Validation& v_;
  fs::path base_;
};

}  // namespace detail

/// Fills defaults, collects every problem at once, and resolves relative
/// paths against `base_dir`. Unknown keys only produce warnings.
inline Validation validate_config(const nlohmann::json& root, const fs::path& base_dir = ".") {
  Validation v;
  auto& c = v.config;
  if (!root.is_object()) {
    v.errors.push_back("<root>: expected a JSON object");
    return v;
  }
  detail::Reader r(v, base_dir);
  static const std::set<std::string> sections{"paths", "corpus", "alignment", "scoring", "backtest", "dim", "workers"};
  for (const auto& [key, _] : root.items()) {
    if (!sections.count(key)) v.warnings.push_back(key + ": unknown key ignored");
  }

  if (auto* p = r.section(root, "paths", {"articles", "calendar", "embeddings", "returns", "output_dir"})) {
    r.read_path(p, "articles", c.paths.articles, true);
    r.read_path(p, "calendar", c.paths.calendar, true);
    r.read_path(p, "embeddings", c.paths.embeddings, true);
    r.read_path(p, "returns", c.paths.returns, true);
    std::string out;
    r.read(p, "paths", "output_dir", out);
    if (!out.empty()) c.paths.output_dir = out;
  }
  c.paths.output_dir = r.resolve(c.paths.output_dir);

  if (auto* s = r.section(root, "corpus", {"min_ticker_score", "update_window_hours", "english_language",
                                           "foreign_language", "boilerplate_patterns", "min_length", "max_length"})) {
    r.read(s, "corpus", "min_ticker_score", c.corpus.min_ticker_score);
    r.read(s, "corpus", "update_window_hours", c.corpus.update_window_hours);
    r.read(s, "corpus", "english_language", c.corpus.english_language);
    r.read(s, "corpus", "foreign_language", c.corpus.foreign_language);
    r.read(s, "corpus", "boilerplate_patterns", c.corpus.rules.boilerplate_patterns);
    r.read(s, "corpus", "min_length", c.corpus.rules.min_length);
    r.read(s, "corpus", "max_length", c.corpus.rules.max_length);
  }
  r.check(c.corpus.min_ticker_score >= 0 && c.corpus.min_ticker_score <= 100, "corpus", "min_ticker_score",
          "must be in [0, 100]");
  r.check(c.corpus.update_window_hours > 0, "corpus", "update_window_hours", "must be > 0");
  r.check(c.corpus.rules.min_length <= c.corpus.rules.max_length, "corpus", "min_length", "must not exceed max_length");
  try {
    corpus::Cleaner probe(c.corpus.rules);
  } catch (const Error& e) {
    v.errors.push_back(std::string("corpus.boilerplate_patterns: ") + e.what());
  }

  auto& a = c.alignment;
  if (auto* s = r.section(root, "alignment", {"epsilon", "tol", "max_iter", "top_frac", "xi_thres", "dump_matrices",
                                              "dump_filter", "baseline_temperature"})) {
    r.read(s, "alignment", "epsilon", a.params.sinkhorn.epsilon);
    r.read(s, "alignment", "tol", a.params.sinkhorn.tol);
    r.read(s, "alignment", "max_iter", a.params.sinkhorn.max_iter);
    r.read(s, "alignment", "top_frac", a.params.top_frac);
    r.read(s, "alignment", "xi_thres", a.params.xi_thres);
    r.read(s, "alignment", "dump_matrices", a.dump_matrices);
    r.read(s, "alignment", "dump_filter", a.dump_filter);
    r.read(s, "alignment", "baseline_temperature", a.baseline_temperature);
  }
  r.check(a.params.sinkhorn.epsilon > 0, "alignment", "epsilon", "must be > 0");
  r.check(a.params.sinkhorn.tol > 0, "alignment", "tol", "must be > 0");
  r.check(a.params.sinkhorn.max_iter >= 1, "alignment", "max_iter", "must be >= 1");
  r.check(a.params.top_frac > 0 && a.params.top_frac <= 1, "alignment", "top_frac", "must be in (0, 1]");
  r.check(a.params.xi_thres >= -1 && a.params.xi_thres <= 1, "alignment", "xi_thres", "must be in [-1, 1]");
  r.check(a.baseline_temperature > 0, "alignment", "baseline_temperature", "must be > 0");

  auto& sc = c.scoring;
  if (auto* s = r.section(root, "scoring", {"lambda_grid", "folds", "window_years", "first_train_year", "last_year",
                                            "min_train_rows", "eval_start", "eval_end"})) {
    r.read(s, "scoring", "lambda_grid", sc.params.lambda_grid);
    r.read(s, "scoring", "folds", sc.params.folds);
    r.read(s, "scoring", "window_years", sc.params.window_years);
    r.read(s, "scoring", "first_train_year", sc.params.first_train_year);
    int last = 0;
    if (s->contains("last_year") && !s->at("last_year").is_null()) {
      r.read(s, "scoring", "last_year", last);
      sc.params.last_year = last;
    }
    r.read(s, "scoring", "min_train_rows", sc.params.min_train_rows);
    r.read(s, "scoring", "eval_start", sc.eval_start);
    r.read(s, "scoring", "eval_end", sc.eval_end);
  }
  r.check(!sc.params.lambda_grid.empty(), "scoring", "lambda_grid", "must not be empty");
  for (double l : sc.params.lambda_grid) {
    r.check(l > 0, "scoring", "lambda_grid", "values must be > 0 (lambda = 0 is excluded)");
  }
  r.check(sc.params.folds >= 2, "scoring", "folds", "must be >= 2");
  r.check(sc.params.window_years >= 0, "scoring", "window_years", "must be >= 0");
  r.check(sc.eval_start <= sc.eval_end, "scoring", "eval_start", "must not be after eval_end");

  auto& b = c.backtest;
  if (auto* s = r.section(root, "backtest", {"n_quantiles", "min_stocks", "annualization_days"})) {
    r.read(s, "backtest", "n_quantiles", b.n_quantiles);
    r.read(s, "backtest", "min_stocks", b.min_stocks);
    r.read(s, "backtest", "annualization_days", b.annualization_days);
  }
  r.check(b.n_quantiles >= 2, "backtest", "n_quantiles", "must be >= 2");
  r.check(b.min_stocks >= static_cast<std::size_t>(std::max(b.n_quantiles, 2)), "backtest", "min_stocks",
          "must be >= n_quantiles");
  r.check(b.annualization_days > 0, "backtest", "annualization_days", "must be > 0");

  r.read(&root, "", "dim", c.dim);
  r.check(c.dim >= 1, "", "dim", "must be >= 1");
  r.read(&root, "", "workers", c.workers);
  r.check(c.workers >= 0, "", "workers", "must be >= 0");
  return v;
}

inline Validation validate_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return validate_config(root, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

/// Normalized config as JSON (defaults filled in).
inline nlohmann::json to_json(const PipelineConfig& c) {
  auto opt_path = [](const std::optional<fs::path>& p) { return p ? nlohmann::json(p->string()) : nlohmann::json(); };
  const auto& sp = c.scoring.params;
  return {
      {"paths",
       {{"articles", opt_path(c.paths.articles)},
        {"calendar", opt_path(c.paths.calendar)},
        {"embeddings", opt_path(c.paths.embeddings)},
        {"returns", opt_path(c.paths.returns)},
        {"output_dir", c.paths.output_dir.string()}}},
      {"corpus",
       {{"min_ticker_score", c.corpus.min_ticker_score},
        {"update_window_hours", c.corpus.update_window_hours},
        {"english_language", c.corpus.english_language},
        {"foreign_language", c.corpus.foreign_language},
        {"boilerplate_patterns", c.corpus.rules.boilerplate_patterns},
        {"min_length", c.corpus.rules.min_length},
        {"max_length", c.corpus.rules.max_length}}},
      {"alignment",
       {{"epsilon", c.alignment.params.sinkhorn.epsilon},
        {"tol", c.alignment.params.sinkhorn.tol},
        {"max_iter", c.alignment.params.sinkhorn.max_iter},
        {"top_frac", c.alignment.params.top_frac},
        {"xi_thres", c.alignment.params.xi_thres},
        {"dump_matrices", c.alignment.dump_matrices},
        {"dump_filter", c.alignment.dump_filter},
        {"baseline_temperature", c.alignment.baseline_temperature}}},
      {"scoring",
       {{"lambda_grid", sp.lambda_grid},
        {"folds", sp.folds},
        {"window_years", sp.window_years},
        {"first_train_year", sp.first_train_year},
        {"last_year", sp.last_year ? nlohmann::json(*sp.last_year) : nlohmann::json()},
        {"min_train_rows", sp.min_train_rows},
        {"eval_start", c.scoring.eval_start},
        {"eval_end", c.scoring.eval_end}}},
      {"backtest",
       {{"n_quantiles", c.backtest.n_quantiles},
        {"min_stocks", c.backtest.min_stocks},
        {"annualization_days", c.backtest.annualization_days}}},
      {"dim", c.dim},
      {"workers", c.workers}};
}

}  // namespace otalign::config
