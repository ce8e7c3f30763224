#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "otalign/scoring.hpp"

using namespace otalign;
using namespace otalign::scoring;
using Catch::Matchers::WithinAbs;

namespace {

Date day_of(int year, int index) {
  using namespace std::chrono;
  return Date{sys_days{Date{std::chrono::year{year}, January, day{2}}} + days{index}};
}

struct Panel {
  std::vector<StockDayFeatures> features;
  std::vector<ReturnObservation> returns;
  Vector w_star;
};

// Stationary linear panel: every slot present, y = x . w* scaled to SNR 1 plus noise.
Panel linear_panel(int first_year, int years, int stocks, int days, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Panel p;
  p.w_star = Vector(dim);
  for (int k = 0; k < dim; ++k) p.w_star[k] = g(rng);
  p.w_star.normalize();
  const double signal_sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int y = first_year; y < first_year + years; ++y) {
    for (int d = 0; d < days; ++d) {
      for (int s = 0; s < stocks; ++s) {
        StockDayFeatures f{{"S" + std::to_string(100 + s), day_of(y, d)}, {}};
        Vector x(dim);
        for (int k = 0; k < dim; ++k) x[k] = g(rng);
        x.normalize();
        for (auto l : kLanguages)
          for (auto kind : kKinds) f.at(l, kind) = x;
        p.returns.push_back({f.key.ticker, f.key.trading_day, 0.01 * (x.dot(p.w_star) / signal_sd + g(rng))});
        p.features.push_back(std::move(f));
      }
    }
  }
  return p;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  Eigen::Map<const Vector> x(a.data(), static_cast<Eigen::Index>(a.size()));
  Eigen::Map<const Vector> y(b.data(), static_cast<Eigen::Index>(b.size()));
  Vector xc = x.array() - x.mean(), yc = y.array() - y.mean();
  return xc.dot(yc) / (xc.norm() * yc.norm());
}

}  // namespace

TEST_CASE("out-of-sample scores track a planted linear signal") {
  auto p = linear_panel(2010, 4, 20, 15, 8, 1);
  ScoringParams params;
  params.first_train_year = 2010;
  auto r = rolling_scores(p.features, p.returns, params);
  REQUIRE_FALSE(r.scores.empty());
  std::map<BundleKey, double> ret;
  for (const auto& o : p.returns) ret[{o.ticker, o.trading_day}] = o.ret_oc;
  std::vector<double> s, y;
  for (const auto& rec : r.scores) {
    if (rec.language != Language::E || rec.kind != Kind::Full) continue;
    s.push_back(rec.score);
    y.push_back(ret.at({rec.ticker, rec.trading_day}));
  }
  CHECK(correlation(s, y) > 0.5);
}

TEST_CASE("every score comes from a model trained on earlier years") {
  auto p = linear_panel(2010, 5, 10, 12, 4, 2);
  ScoringParams params;
  params.first_train_year = 2010;
  auto r = rolling_scores(p.features, p.returns, params);
  CHECK(count_lookahead_violations(r.scores) == 0);
  for (const auto& m : r.models) {
    CHECK(m.window_end == m.scoring_year - 1);
    CHECK(m.window_start == m.scoring_year - 6);
    CHECK(year_of(m.last_training_day) < m.scoring_year);
    CHECK(std::find(params.lambda_grid.begin(), params.lambda_grid.end(), m.lambda) != params.lambda_grid.end());
    CHECK(m.rows >= params.min_train_rows);
  }
  // 4 scoring years x 6 cells
  CHECK(r.models.size() == 24);

  auto bad = r.scores.front();
  bad.model_window_end = year_of(bad.trading_day);
  CHECK(count_lookahead_violations({bad}) == 1);
}

TEST_CASE("the training window spans six calendar years") {
  auto p = linear_panel(2000, 9, 10, 12, 4, 3);
  ScoringParams params;
  params.first_train_year = 2007;
  params.min_train_rows = 1;
  auto r = rolling_scores(p.features, p.returns, params);
  for (const auto& m : r.models) {
    REQUIRE(m.scoring_year == 2008);
    CHECK(m.window_start == 2002);
    CHECK(m.rows == 6u * 10u * 12u);
  }
}

TEST_CASE("absent features on a scoring day produce no score") {
  auto p = linear_panel(2010, 3, 10, 12, 4, 4);
  BundleKey gap;
  for (auto& f : p.features) {
    if (year_of(f.key.trading_day) == 2012) {
      f.at(Language::F, Kind::Aligned).reset();
      gap = f.key;
      break;
    }
  }
  ScoringParams params;
  params.first_train_year = 2010;
  auto r = rolling_scores(p.features, p.returns, params);
  for (const auto& s : r.scores) {
    bool same = s.ticker == gap.ticker && std::chrono::sys_days{s.trading_day} == std::chrono::sys_days{gap.trading_day};
    if (same) CHECK_FALSE((s.language == Language::F && s.kind == Kind::Aligned));
  }
  std::size_t fa = std::count_if(r.scores.begin(), r.scores.end(),
                                 [](const auto& s) { return s.language == Language::F && s.kind == Kind::Aligned; });
  std::size_t ef = std::count_if(r.scores.begin(), r.scores.end(),
                                 [](const auto& s) { return s.language == Language::E && s.kind == Kind::Full; });
  CHECK(fa + 1 == ef);
}

TEST_CASE("thin training windows are skipped and logged") {
  auto p = linear_panel(2010, 2, 3, 5, 4, 5);  // 15 rows per year
  ScoringParams params;
  params.first_train_year = 2010;
  auto r = rolling_scores(p.features, p.returns, params);
  CHECK(r.scores.empty());
  CHECK(r.models.empty());
  REQUIRE(r.skipped.size() == 6);
  CHECK(r.skipped[0].rows == 15);
  CHECK(r.skipped[0].reason.rfind("ModelSkipped", 0) == 0);

  ScoringParams early = params;
  early.first_train_year = 2005;
  early.last_year = 2007;
  auto e = rolling_scores(p.features, p.returns, early);
  CHECK(e.skipped.size() == 12);
  CHECK(e.skipped[0].reason.find("empty") != std::string::npos);
}

TEST_CASE("results do not depend on the worker count") {
  auto p = linear_panel(2010, 4, 12, 10, 6, 6);
  ScoringParams params;
  params.first_train_year = 2010;
  auto a = rolling_scores(p.features, p.returns, params, 1);
  auto b = rolling_scores(p.features, p.returns, params, 8);
  REQUIRE(a.scores.size() == b.scores.size());
  for (std::size_t i = 0; i < a.scores.size(); ++i) {
    CHECK(a.scores[i].ticker == b.scores[i].ticker);
    CHECK(a.scores[i].score == b.scores[i].score);
  }
  REQUIRE(a.models.size() == b.models.size());
  for (std::size_t i = 0; i < a.models.size(); ++i) CHECK(a.models[i].weights == b.models[i].weights);
}

TEST_CASE("duplicate returns are rejected") {
  auto p = linear_panel(2010, 2, 2, 2, 4, 7);
  p.returns.push_back(p.returns.front());
  CHECK_THROWS_AS(rolling_scores(p.features, p.returns, ScoringParams{}), Error);
}

TEST_CASE("returns and scores round-trip through CSV") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "otalign_scoring_test";
  fs::create_directories(dir);
  std::vector<ReturnObservation> rets{{"AAA", day_of(2020, 0), 0.0123}, {"BBB", day_of(2020, 1), -0.5}};
  write_returns((dir / "r.csv").string(), rets);
  auto back = read_returns((dir / "r.csv").string());
  REQUIRE(back.size() == 2);
  CHECK(back[1].ticker == "BBB");
  CHECK(back[0].ret_oc == 0.0123);

  std::vector<ScoreRecord> scores{{"AAA", day_of(2020, 0), Language::F, Kind::Unaligned, 1.0 / 3.0, 2019, {}}};
  write_scores((dir / "s.csv").string(), scores);
  auto s = read_scores((dir / "s.csv").string());
  REQUIRE(s.size() == 1);
  CHECK(s[0].score == 1.0 / 3.0);
  CHECK(s[0].kind == Kind::Unaligned);
  CHECK(s[0].language == Language::F);

  {
    std::ofstream out(dir / "bad.csv");
    out << "ticker,date,ret_oc\nAAA,2020-01-02,0.01\nBBB,2020-01-02,-1\n";
  }
  try {
    read_returns((dir / "bad.csv").string());
    FAIL("expected DataError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DataError);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  fs::remove_all(dir);
}
