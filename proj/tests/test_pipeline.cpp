#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "otalign/pipeline.hpp"
#include "otalign/synth.hpp"

using namespace otalign;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
};

// Small synthetic corpus plus a config pointing at it.
json write_small_corpus(const fs::path& dir) {
  synth::SynthConfig s;
  s.seed = 21;
  s.stocks = 20;
  s.first_year = 2015;
  s.years = 3;
  s.days_per_year = 12;
  s.news_probability = 1.0;
  s.sentences_min = 6;
  s.sentences_max = 12;
  s.dim = 16;
  synth::write_corpus(synth::generate_corpus(s), dir);
  return json{{"paths",
               {{"articles", "articles.jsonl"},
                {"calendar", "calendar.json"},
                {"embeddings", "sentences.jsonl"},
                {"returns", "returns.csv"},
                {"output_dir", "out"}}},
              {"dim", 16},
              {"scoring", {{"first_train_year", 2015}, {"eval_start", 2016}, {"eval_end", 2017}}}};
}

config::PipelineConfig load(const json& j, const fs::path& dir) {
  auto v = config::validate_config(j, dir);
  INFO((v.errors.empty() ? std::string() : v.errors.front()));
  REQUIRE(v.ok());
  return v.config;
}

std::set<pipeline::Stage> all_stages() { return {pipeline::kAllStages.begin(), pipeline::kAllStages.end()}; }

bool has(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("an empty config is fully defaulted") {
  auto v = config::validate_config(json::object());
  REQUIRE(v.ok());
  const auto& c = v.config;
  CHECK(c.alignment.params.xi_thres == 0.6);
  CHECK(c.alignment.params.top_frac == 0.05);
  CHECK(c.alignment.params.sinkhorn.epsilon == 0.05);
  CHECK(c.scoring.params.lambda_grid == ridge::default_lambda_grid());
  CHECK(c.scoring.params.window_years == 5);
  CHECK(c.scoring.params.folds == 5);
  CHECK(c.scoring.params.first_train_year == 2012);
  CHECK(c.scoring.eval_start == 2018);
  CHECK(c.backtest.n_quantiles == 5);
  CHECK(c.backtest.min_stocks == 20);
  CHECK(c.backtest.annualization_days == 252);
  CHECK(c.corpus.min_ticker_score == 75);
  CHECK(c.dim == 768);
  auto echoed = config::to_json(c);
  CHECK(echoed["alignment"]["xi_thres"] == 0.6);
}

TEST_CASE("a lambda grid containing zero is rejected") {
  auto v = config::validate_config(json{{"scoring", {{"lambda_grid", {0, 10, 20}}}}});
  CHECK_FALSE(v.ok());
  CHECK(has(v.errors, "scoring.lambda_grid"));
}

TEST_CASE("unknown keys warn without failing") {
  auto v = config::validate_config(json{{"colour", "blue"}, {"alignment", {{"epsilonn", 0.1}}}});
  CHECK(v.ok());
  CHECK(has(v.warnings, "colour"));
  CHECK(has(v.warnings, "alignment.epsilonn"));
}

TEST_CASE("every config problem is reported at once with its field path") {
  auto v = config::validate_config(json{{"alignment", {{"epsilon", -1}, {"top_frac", 2}}},
                                        {"backtest", {{"n_quantiles", 1}}},
                                        {"scoring", {{"folds", "five"}}},
                                        {"paths", {{"articles", "does/not/exist.jsonl"}}}});
  CHECK(has(v.errors, "alignment.epsilon"));
  CHECK(has(v.errors, "alignment.top_frac"));
  CHECK(has(v.errors, "backtest.n_quantiles"));
  CHECK(has(v.errors, "scoring.folds"));
  CHECK(has(v.errors, "paths.articles"));
  CHECK(v.errors.size() >= 5);
}

TEST_CASE("config paths resolve against the config location") {
  Workspace ws("otalign_cfg_paths");
  fs::create_directories(ws.dir / "data");
  std::ofstream(ws.dir / "data" / "r.csv") << "ticker,date,ret_oc\n";
  std::ofstream(ws.dir / "cfg.json") << json{{"paths", {{"returns", "data/r.csv"}, {"output_dir", "o"}}}}.dump();
  auto v = config::validate_config_file(ws.dir / "cfg.json");
  REQUIRE(v.ok());
  CHECK(*v.config.paths.returns == ws.dir / "data" / "r.csv");
  CHECK(v.config.paths.output_dir == ws.dir / "o");
  std::ofstream(ws.dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(config::validate_config_file(ws.dir / "broken.json"), Error);
}

TEST_CASE("full run writes every stage, then reruns as a no-op") {
  Workspace ws("otalign_pipeline_full");
  auto cfg = load(write_small_corpus(ws.dir), ws.dir);
  cfg.workers = 2;
  pipeline::Pipeline p(cfg);
  auto first = p.run(all_stages());
  REQUIRE(first.stages.size() == 6);
  for (const auto& s : first.stages) CHECK(s.ran);
  CHECK(first.manifest["stages"].size() == 6);
  CHECK(first.manifest["code_version"] == pipeline::kCodeVersion);
  for (const auto& [stage, entry] : first.manifest["stages"].items()) {
    CHECK_FALSE(entry["outputs"].empty());
    CHECK(entry["params_hash"].get<std::string>().size() == 64);
    for (const auto& [name, hash] : entry["outputs"].items()) CHECK(fs::exists(cfg.paths.output_dir / name));
  }
  CHECK(first.manifest.dump().find(ws.dir.string()) == std::string::npos);

  auto summary = csv::read((cfg.paths.output_dir / pipeline::artifact::kSummary).string());
  CHECK(summary.rows.size() == 6);

  auto second = pipeline::Pipeline(cfg).run(all_stages());
  for (const auto& s : second.stages) CHECK_FALSE(s.ran);
  CHECK(second.manifest == first.manifest);

  auto forced = pipeline::Pipeline(cfg).run({pipeline::Stage::Backtest}, true);
  CHECK(forced.stages.at(0).ran);
  CHECK(forced.manifest == first.manifest);
}

TEST_CASE("deleted artifacts are rebuilt bit-identically") {
  Workspace ws("otalign_pipeline_rebuild");
  auto cfg = load(write_small_corpus(ws.dir), ws.dir);
  pipeline::Pipeline(cfg).run(all_stages());
  auto scores = cfg.paths.output_dir / pipeline::artifact::kScores;
  auto aligned = cfg.paths.output_dir / pipeline::artifact::kAlignments;
  auto before_scores = slurp(scores), before_aligned = slurp(aligned);
  fs::remove(scores);
  fs::remove(aligned);
  auto rerun = pipeline::Pipeline(cfg).run(all_stages());
  CHECK(slurp(scores) == before_scores);
  CHECK(slurp(aligned) == before_aligned);
  int ran = 0;
  for (const auto& s : rerun.stages) ran += s.ran ? 1 : 0;
  CHECK(ran == 2);  // align and score; downstream inputs hash the same
}

TEST_CASE("changing a parameter reruns only the affected stages") {
  Workspace ws("otalign_pipeline_params");
  auto cfg = load(write_small_corpus(ws.dir), ws.dir);
  pipeline::Pipeline(cfg).run(all_stages());
  cfg.backtest.n_quantiles = 4;
  auto r = pipeline::Pipeline(cfg).run(all_stages());
  std::vector<bool> ran;
  for (const auto& s : r.stages) ran.push_back(s.ran);
  CHECK(ran == std::vector<bool>{false, false, false, false, true, false});
}

TEST_CASE("missing upstream artifacts name the stage to run") {
  Workspace ws("otalign_pipeline_dep");
  auto cfg = load(write_small_corpus(ws.dir), ws.dir);
  try {
    pipeline::Pipeline(cfg).run({pipeline::Stage::Score});
    FAIL("expected StageDependencyError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StageDependencyError);
    CHECK(std::string(e.what()).find("aggregate") != std::string::npos);
  }
  auto no_paths = cfg;
  no_paths.paths.articles.reset();
  CHECK_THROWS_AS(pipeline::Pipeline(no_paths).run({pipeline::Stage::Preprocess}), Error);
}

TEST_CASE("matrix dumps are written for selected stock-days") {
  Workspace ws("otalign_pipeline_dump");
  auto j = write_small_corpus(ws.dir);
  j["alignment"] = {{"dump_matrices", true}, {"dump_filter", {"S0003@2016-01-05"}}};
  auto cfg = load(j, ws.dir);
  pipeline::Pipeline(cfg).run({pipeline::Stage::Align});
  std::ifstream in(cfg.paths.output_dir / pipeline::artifact::kHeatmaps);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 1);
  auto h = report::heatmap_from_json(json::parse(lines[0]));
  CHECK(h.ticker == "S0003");
  CHECK(h.gamma.rows() == static_cast<Eigen::Index>(h.english_sentences.size()));
  CHECK(h.softmax.cols() == static_cast<Eigen::Index>(h.foreign_sentences.size()));
}

TEST_CASE("alignment records round-trip") {
  Matrix e = Matrix::Identity(3, 4), f = Matrix::Identity(2, 4);
  auto r = ot::align(e, f);
  auto j = pipeline::alignment_record({"A", Date{std::chrono::year{2020}, std::chrono::May, std::chrono::day{1}}}, r,
                                      ot::AlignmentParams{});
  auto back = pipeline::alignment_from_json(json::parse(j.dump()));
  CHECK(back.n == 3);
  CHECK(back.m == 2);
  CHECK(pipeline::alignment_mask(back) == r.alignment.mask);
  CHECK(j["params"]["xi_thres"] == 0.6);
}

TEST_CASE("stage names parse") {
  CHECK(pipeline::parse_stage("align") == pipeline::Stage::Align);
  CHECK(pipeline::parse_stage("report") == pipeline::Stage::Report);
  CHECK_THROWS_AS(pipeline::parse_stage("deploy"), Error);
}
