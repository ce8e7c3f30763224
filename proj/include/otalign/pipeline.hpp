#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aggregate.hpp"
#include "backtest.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "embed_io.hpp"
#include "hash.hpp"
#include "ot.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "scoring.hpp"

namespace otalign::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view kCodeVersion = "otalign-0.1.0";

enum class Stage { Preprocess, Align, Aggregate, Score, Backtest, Report };

inline constexpr std::array<Stage, 6> kAllStages{Stage::Preprocess, Stage::Align,    Stage::Aggregate,
                                                 Stage::Score,      Stage::Backtest, Stage::Report};

constexpr std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Preprocess: return "preprocess";
    case Stage::Align: return "align";
    case Stage::Aggregate: return "aggregate";
    case Stage::Score: return "score";
    case Stage::Backtest: return "backtest";
    case Stage::Report: return "report";
  }
  return "?";
}

inline Stage parse_stage(std::string_view s) {
  for (auto st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::ConfigError, "unknown stage '" + std::string(s) + "'");
}

/// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* kBundles = "bundles.jsonl";
inline constexpr const char* kPreprocessStats = "preprocess_stats.json";
inline constexpr const char* kAlignments = "alignments.jsonl";
inline constexpr const char* kHeatmaps = "heatmaps.jsonl";
inline constexpr const char* kAggregates = "aggregates.jsonl";
inline constexpr const char* kScores = "scores.csv";
inline constexpr const char* kModels = "models.jsonl";
inline constexpr const char* kDailyLs = "daily_ls.csv";
inline constexpr const char* kSummary = "strategy_summary.csv";
inline constexpr const char* kSimilarity = "similarity_table.csv";
inline constexpr const char* kCorrelation = "correlation_matrix.csv";
inline constexpr const char* kCoverage = "coverage.csv";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

struct StageOutcome {
  Stage stage;
  bool ran = false;  // false when skipped as up to date
  std::vector<std::string> outputs;
};

struct RunResult {
  std::vector<StageOutcome> stages;
  json manifest;
  std::vector<std::string> log;
};

// ---------------------------------------------------------------------------
// Alignment and aggregate record formats

inline json alignment_record(const embed::BundleKey& key, const ot::AlignmentResult& r, const ot::AlignmentParams& p) {
  json pairs = json::array();
  for (const auto& ap : r.pairs()) pairs.push_back({ap.english, ap.foreign, ap.similarity, ap.gamma});
  return {{"ticker", key.ticker},
          {"trading_day", format_date(key.trading_day)},
          {"n", r.cost.similarity.rows()},
          {"m", r.cost.similarity.cols()},
          {"pairs", pairs},
          {"converged", r.converged()},
          {"iterations", {r.forward_plan.iterations, r.backward_plan.iterations}},
          {"marginal_error", std::max(r.forward_plan.marginal_error, r.backward_plan.marginal_error)},
          {"degenerate_cost", r.cost.degenerate},
          {"params",
           {{"epsilon", p.sinkhorn.epsilon},
            {"tol", p.sinkhorn.tol},
            {"max_iter", p.sinkhorn.max_iter},
            {"top_frac", p.top_frac},
            {"xi_thres", p.xi_thres}}}};
}

struct AlignmentRecord {
  embed::BundleKey key;
  std::size_t n = 0, m = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  bool converged = true;
};

inline AlignmentRecord alignment_from_json(const json& j) {
  AlignmentRecord a{{j.at("ticker").get<std::string>(), parse_date(j.at("trading_day").get<std::string>())},
                    j.at("n").get<std::size_t>(), j.at("m").get<std::size_t>(), {}, j.at("converged").get<bool>()};
  for (const auto& p : j.at("pairs")) a.pairs.emplace_back(p.at(0).get<Eigen::Index>(), p.at(1).get<Eigen::Index>());
  return a;
}

inline Mask alignment_mask(const AlignmentRecord& a) {
  Mask m = Mask::Zero(static_cast<Eigen::Index>(a.n), static_cast<Eigen::Index>(a.m));
  for (auto [i, j] : a.pairs) m(i, j) = 1;
  return m;
}

inline report::AlignmentSummary summarize_alignment(const AlignmentRecord& a) {
  auto sets = aggregate::split_aligned_sets(alignment_mask(a));
  return {a.key.ticker, a.key.trading_day, a.n, a.m, sets.english.size(), sets.foreign.size(), a.pairs.size(),
          a.converged};
}

inline std::vector<float> to_float(const Vector& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

inline json aggregate_record(const embed::BundleKey& key, const aggregate::AggregatedEmbeddings& agg, bool converged,
                             const std::string& params_hash) {
  json vectors;
  for (auto l : kLanguages) {
    for (auto k : kKinds) {
      const auto& slot = agg.at(l, k);
      json e{{"count", slot.count}, {"raw_norm", slot.raw_norm}};
      if (slot.vector) {
        e["embedding_b64"] = embed::encode_floats(to_float(*slot.vector));
      } else {
        e["absent"] = slot.absent == aggregate::AbsentReason::ZeroMean ? "ZeroMean" : "NoSentences";
      }
      vectors[std::string(to_string(l))][std::string(to_string(k))] = e;
    }
  }
  return {{"ticker", key.ticker},
          {"trading_day", format_date(key.trading_day)},
          {"converged", converged},
          {"alignment_params_hash", params_hash},
          {"vectors", vectors}};
}

inline scoring::StockDayFeatures features_from_json(const json& j) {
  scoring::StockDayFeatures f{{j.at("ticker").get<std::string>(), parse_date(j.at("trading_day").get<std::string>())},
                              {}};
  const auto& vectors = j.at("vectors");
  for (auto l : kLanguages) {
    for (auto k : kKinds) {
      const auto& e = vectors.at(std::string(to_string(l))).at(std::string(to_string(k)));
      if (e.contains("embedding_b64")) {
        auto floats = embed::decode_floats(e.at("embedding_b64").get<std::string>());
        Vector v(static_cast<Eigen::Index>(floats.size()));
        for (std::size_t i = 0; i < floats.size(); ++i) v[static_cast<Eigen::Index>(i)] = floats[i];
        f.at(l, k) = std::move(v);
      }
    }
  }
  return f;
}

template <typename T, typename Parse>
std::vector<T> read_jsonl(const fs::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StageDependencyError, "cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!text::is_blank(line)) out.push_back(parse(json::parse(line)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runner

class Pipeline {
 public:
  explicit Pipeline(config::PipelineConfig cfg) : cfg_(std::move(cfg)) {
    workers_ = cfg_.workers > 0 ? cfg_.workers : default_workers();
  }

  /// Runs the requested stages in pipeline order. A stage whose recorded
  /// inputs, parameters and outputs are unchanged is skipped unless forced.
  RunResult run(const std::set<Stage>& stages, bool force = false) {
    fs::create_directories(cfg_.paths.output_dir);
    manifest_ = load_manifest();
    RunResult result;
    for (auto stage : kAllStages) {
      if (!stages.count(stage)) continue;
      result.stages.push_back(run_stage(stage, force, result.log));
      save_manifest();
    }
    result.manifest = manifest_;
    return result;
  }

  const config::PipelineConfig& config() const { return cfg_; }

 private:
  fs::path out(const char* name) const { return cfg_.paths.output_dir / name; }

  json load_manifest() const {
    auto path = out(artifact::kManifest);
    if (!fs::exists(path)) return json{{"code_version", kCodeVersion}, {"stages", json::object()}};
    std::ifstream in(path);
    try {
      auto j = json::parse(in);
      if (j.value("code_version", std::string{}) == kCodeVersion) return j;
    } catch (const json::exception&) {
    }
    return json{{"code_version", kCodeVersion}, {"stages", json::object()}};
  }

  void save_manifest() const {
    std::ofstream o(out(artifact::kManifest), std::ios::binary);
    o << manifest_.dump(2) << '\n';
  }

  fs::path require_input(const std::optional<fs::path>& p, const std::string& field, Stage stage) const {
    if (!p) {
      throw Error(ErrorCode::StageDependencyError,
                  "stage '" + std::string(to_string(stage)) + "' needs paths." + field + " in the config");
    }
    if (!fs::exists(*p)) {
      throw Error(ErrorCode::StageDependencyError,
                  "stage '" + std::string(to_string(stage)) + "' input missing: " + p->string());
    }
    return *p;
  }

  fs::path require_artifact(const char* name, Stage stage, Stage producer) const {
    auto p = out(name);
    if (!fs::exists(p)) {
      throw Error(ErrorCode::StageDependencyError, "stage '" + std::string(to_string(stage)) + "' needs " + name +
                                                       "; run stage '" + std::string(to_string(producer)) + "' first");
    }
    return p;
  }

  /// Inputs (logical name -> path) and parameters of a stage.
  std::pair<std::map<std::string, fs::path>, json> plan(Stage stage) const {
    std::map<std::string, fs::path> in;
    json params;
    auto full = config::to_json(cfg_);
    switch (stage) {
      case Stage::Preprocess:
        in["articles"] = require_input(cfg_.paths.articles, "articles", stage);
        in["calendar"] = require_input(cfg_.paths.calendar, "calendar", stage);
        params = full["corpus"];
        break;
      case Stage::Align:
        in["embeddings"] = require_input(cfg_.paths.embeddings, "embeddings", stage);
        params = full["alignment"];
        params["dim"] = cfg_.dim;
        break;
      case Stage::Aggregate:
        in["embeddings"] = require_input(cfg_.paths.embeddings, "embeddings", stage);
        in["alignments"] = require_artifact(artifact::kAlignments, stage, Stage::Align);
        params["dim"] = cfg_.dim;
        break;
      case Stage::Score:
        in["aggregates"] = require_artifact(artifact::kAggregates, stage, Stage::Aggregate);
        in["returns"] = require_input(cfg_.paths.returns, "returns", stage);
        params = full["scoring"];
        params.erase("eval_start");
        params.erase("eval_end");
        break;
      case Stage::Backtest:
        in["scores"] = require_artifact(artifact::kScores, stage, Stage::Score);
        in["returns"] = require_input(cfg_.paths.returns, "returns", stage);
        params = full["backtest"];
        params["eval_start"] = cfg_.scoring.eval_start;
        params["eval_end"] = cfg_.scoring.eval_end;
        break;
      case Stage::Report:
        in["alignments"] = require_artifact(artifact::kAlignments, stage, Stage::Align);
        in["aggregates"] = require_artifact(artifact::kAggregates, stage, Stage::Aggregate);
        in["scores"] = require_artifact(artifact::kScores, stage, Stage::Score);
        in["returns"] = require_input(cfg_.paths.returns, "returns", stage);
        break;
    }
    if (params.is_null()) params = json::object();
    return {in, params};
  }

  bool up_to_date(const json& entry, const json& inputs, const std::string& params_hash) const {
    if (!entry.is_object()) return false;
    if (entry.value("inputs", json()) != inputs || entry.value("params_hash", std::string{}) != params_hash) {
      return false;
    }
    for (const auto& [name, hash] : entry.at("outputs").items()) {
      auto p = cfg_.paths.output_dir / name;
      if (!fs::exists(p) || sha256_file(p) != hash.get<std::string>()) return false;
    }
    return true;
  }

  StageOutcome run_stage(Stage stage, bool force, std::vector<std::string>& log) {
    auto [inputs, params] = plan(stage);
    json input_hashes = json::object();
    for (const auto& [name, path] : inputs) input_hashes[name] = sha256_file(path);
    const std::string params_hash = sha256_hex(params.dump());
    const std::string key(to_string(stage));

    StageOutcome outcome{stage, false, {}};
    auto& entry = manifest_["stages"][key];
    if (!force && up_to_date(entry, input_hashes, params_hash)) {
      for (const auto& [name, _] : entry.at("outputs").items()) outcome.outputs.push_back(name);
      log.push_back(key + ": up to date, skipped");
      return outcome;
    }

    std::vector<std::string> outputs;
    switch (stage) {
      case Stage::Preprocess: outputs = preprocess(inputs, log); break;
      case Stage::Align: outputs = align(inputs, log); break;
      case Stage::Aggregate: outputs = aggregate(inputs, params_hash_of(Stage::Align), log); break;
      case Stage::Score: outputs = score(inputs, log); break;
      case Stage::Backtest: outputs = run_backtest(inputs, log); break;
      case Stage::Report: outputs = run_report(inputs, log); break;
    }
    json out_hashes = json::object();
    for (const auto& name : outputs) out_hashes[name] = sha256_file(cfg_.paths.output_dir / name);
    entry = json{{"inputs", input_hashes}, {"params", params}, {"params_hash", params_hash}, {"outputs", out_hashes}};
    outcome.ran = true;
    outcome.outputs = outputs;
    log.push_back(key + ": wrote " + std::to_string(outputs.size()) + " artifact(s)");
    return outcome;
  }

  std::string params_hash_of(Stage stage) const {
    auto [_, params] = plan(stage);
    return sha256_hex(params.dump());
  }

  const std::vector<embed::SentenceRecord>& sentences(const fs::path& path) {
    if (!sentences_ || sentences_path_ != path) {
      sentences_ = embed::read_sentence_records(path.string(), cfg_.dim);
      sentences_path_ = path;
    }
    return *sentences_;
  }

  std::vector<std::string> preprocess(const std::map<std::string, fs::path>& in, std::vector<std::string>& log) {
    auto articles = corpus::read_raw_articles(in.at("articles").string());
    std::ifstream cal_in(in.at("calendar"));
    corpus::ExchangeCalendar cal;
    try {
      cal = corpus::calendar_from_json(json::parse(cal_in));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, "calendar: " + std::string(e.what()));
    }
    corpus::BundleOptions opts;
    opts.min_ticker_score = cfg_.corpus.min_ticker_score;
    opts.update_window = std::chrono::hours{static_cast<long>(cfg_.corpus.update_window_hours)};
    opts.english_language = cfg_.corpus.english_language;
    opts.foreign_language = cfg_.corpus.foreign_language;
    opts.rules = cfg_.corpus.rules;
    corpus::BundleStats stats;
    auto bundles = corpus::bundle_stock_days(articles, cal, opts, &stats);
    corpus::write_bundles(out(artifact::kBundles).string(), bundles);
    json s{{"input_records", stats.input_records},       {"superseded_or_late", stats.superseded_or_late},
           {"low_score", stats.low_score},               {"multi_ticker", stats.multi_ticker},
           {"other_language", stats.other_language},     {"rejected_short", stats.rejected_short},
           {"rejected_long", stats.rejected_long},       {"rejected_empty", stats.rejected_empty},
           {"calendar_gap", stats.calendar_gap},         {"one_sided_groups", stats.one_sided_groups},
           {"bundles", bundles.size()}};
    std::ofstream(out(artifact::kPreprocessStats), std::ios::binary) << s.dump(2) << '\n';
    log.push_back("preprocess: " + std::to_string(bundles.size()) + " stock-day bundles");
    return {artifact::kBundles, artifact::kPreprocessStats};
  }

  bool dump_wanted(const embed::BundleKey& key) const {
    if (!cfg_.alignment.dump_matrices) return false;
    if (cfg_.alignment.dump_filter.empty()) return true;
    std::string tag = key.ticker + "@" + format_date(key.trading_day);
    return std::find(cfg_.alignment.dump_filter.begin(), cfg_.alignment.dump_filter.end(), tag) !=
           cfg_.alignment.dump_filter.end();
  }

  std::vector<std::string> align(const std::map<std::string, fs::path>& in, std::vector<std::string>& log) {
    auto groups = embed::group_by_bundle(sentences(in.at("embeddings")));
    std::vector<std::pair<const embed::BundleKey*, const std::vector<embed::SentenceRecord>*>> items;
    for (const auto& [key, recs] : groups) items.emplace_back(&key, &recs);

    std::vector<std::string> lines(items.size());
    std::vector<std::string> dumps(items.size());
    std::vector<char> skipped(items.size(), 0);
    const auto& params = cfg_.alignment.params;
    parallel_for(items.size(), workers_, [&](std::size_t i) {
      const auto& [key, recs] = items[i];
      embed::EmbeddingMatrixPair pair;
      try {
        pair = embed::stack_bundle(*recs);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::IncompleteBundle) throw;
        skipped[i] = 1;
        return;
      }
      auto result = ot::align(pair, params);
      lines[i] = alignment_record(*key, result, params).dump();
      if (dump_wanted(*key)) {
        auto h = report::heatmap_dump(result.cost.similarity, result.forward_plan.gamma,
                                      cfg_.alignment.baseline_temperature);
        h.ticker = key->ticker;
        h.trading_day = key->trading_day;
        std::vector<const embed::SentenceRecord*> sorted;
        for (const auto& r : *recs) sorted.push_back(&r);
        std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
          return std::tie(a->language, a->sentence_index) < std::tie(b->language, b->sentence_index);
        });
        for (auto* r : sorted) (r->language == Language::E ? h.english_sentences : h.foreign_sentences).push_back(r->text);
        dumps[i] = report::to_json(h).dump();
      }
    });

    std::ofstream o(out(artifact::kAlignments), std::ios::binary);
    std::size_t written = 0, incomplete = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (skipped[i]) {
        ++incomplete;
        continue;
      }
      o << lines[i] << '\n';
      ++written;
    }
    o.close();
    std::vector<std::string> outputs{artifact::kAlignments};
    if (cfg_.alignment.dump_matrices) {
      std::ofstream h(out(artifact::kHeatmaps), std::ios::binary);
      for (const auto& d : dumps) {
        if (!d.empty()) h << d << '\n';
      }
      outputs.push_back(artifact::kHeatmaps);
    }
    log.push_back("align: " + std::to_string(written) + " stock-days aligned, " + std::to_string(incomplete) +
                  " one-sided skipped");
    return outputs;
  }

  std::vector<std::string> aggregate(const std::map<std::string, fs::path>& in, const std::string& align_hash,
                                     std::vector<std::string>& log) {
    auto groups = embed::group_by_bundle(sentences(in.at("embeddings")));
    auto records = read_jsonl<AlignmentRecord>(in.at("alignments"), alignment_from_json);
    std::vector<std::string> lines(records.size());
    parallel_for(records.size(), workers_, [&](std::size_t i) {
      const auto& a = records[i];
      auto it = groups.find(a.key);
      if (it == groups.end()) {
        throw Error(ErrorCode::StageDependencyError,
                    "alignment for " + a.key.ticker + " " + format_date(a.key.trading_day) + " has no embeddings");
      }
      auto pair = embed::stack_bundle(it->second);
      if (static_cast<std::size_t>(pair.english.rows()) != a.n || static_cast<std::size_t>(pair.foreign.rows()) != a.m) {
        throw Error(ErrorCode::StageDependencyError, "alignments.jsonl is stale relative to the embeddings");
      }
      auto sets = aggregate::split_aligned_sets(alignment_mask(a));
      auto agg = aggregate::aggregate_embeddings(pair, sets);
      lines[i] = aggregate_record(a.key, agg, a.converged, align_hash).dump();
    });
    std::ofstream o(out(artifact::kAggregates), std::ios::binary);
    for (const auto& l : lines) o << l << '\n';
    log.push_back("aggregate: " + std::to_string(lines.size()) + " stock-days");
    return {artifact::kAggregates};
  }

  std::vector<std::string> score(const std::map<std::string, fs::path>& in, std::vector<std::string>& log) {
    auto features = read_jsonl<scoring::StockDayFeatures>(in.at("aggregates"), features_from_json);
    auto returns = scoring::read_returns(in.at("returns").string());
    auto result = scoring::rolling_scores(features, returns, cfg_.scoring.params, workers_);
    scoring::write_scores(out(artifact::kScores).string(), result.scores);
    std::ofstream o(out(artifact::kModels), std::ios::binary);
    for (const auto& m : result.models) o << scoring::to_json(m).dump() << '\n';
    for (const auto& s : result.skipped) {
      o << json{{"scoring_year", s.scoring_year},
                {"language", std::string(to_string(s.language))},
                {"kind", std::string(to_string(s.kind))},
                {"rows", s.rows},
                {"skipped", s.reason}}
               .dump()
        << '\n';
      log.push_back("score: " + std::to_string(s.scoring_year) + " " + std::string(to_string(s.language)) + "/" +
                    std::string(to_string(s.kind)) + " " + s.reason);
    }
    log.push_back("score: " + std::to_string(result.scores.size()) + " scores from " +
                  std::to_string(result.models.size()) + " models");
    return {artifact::kScores, artifact::kModels};
  }

  std::vector<std::string> run_backtest(const std::map<std::string, fs::path>& in, std::vector<std::string>& log) {
    auto scores = scoring::read_scores(in.at("scores").string());
    std::erase_if(scores, [&](const scoring::ScoreRecord& s) {
      int y = year_of(s.trading_day);
      return y < cfg_.scoring.eval_start || y > cfg_.scoring.eval_end;
    });
    auto returns = scoring::read_returns(in.at("returns").string());
    auto portfolios = backtest::form_portfolios(scores, returns, cfg_.backtest);
    backtest::write_daily(out(artifact::kDailyLs).string(), portfolios);
    backtest::write_summary(out(artifact::kSummary).string(),
                            backtest::summarize(portfolios, cfg_.backtest.annualization_days));
    log.push_back("backtest: " + std::to_string(portfolios.size()) + " daily portfolios");
    return {artifact::kDailyLs, artifact::kSummary};
  }

  std::vector<std::string> run_report(const std::map<std::string, fs::path>& in, std::vector<std::string>& log) {
    auto features = read_jsonl<scoring::StockDayFeatures>(in.at("aggregates"), features_from_json);
    report::write_similarity_table(out(artifact::kSimilarity).string(), report::similarity_table(features));
    auto scores = scoring::read_scores(in.at("scores").string());
    auto returns = scoring::read_returns(in.at("returns").string());
    report::write_correlation_matrix(out(artifact::kCorrelation).string(), report::correlation_matrix(scores, returns));
    auto alignments = read_jsonl<AlignmentRecord>(in.at("alignments"), alignment_from_json);
    std::vector<report::AlignmentSummary> summaries;
    for (const auto& a : alignments) summaries.push_back(summarize_alignment(a));
    report::write_coverage(out(artifact::kCoverage).string(), report::coverage_series(summaries));
    log.push_back("report: wrote similarity, correlation and coverage tables");
    return {artifact::kSimilarity, artifact::kCorrelation, artifact::kCoverage};
  }

  config::PipelineConfig cfg_;
  int workers_ = 1;
  json manifest_;
  std::optional<std::vector<embed::SentenceRecord>> sentences_;
  fs::path sentences_path_;
};

}  // namespace otalign::pipeline
