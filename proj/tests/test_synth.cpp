#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "otalign/synth.hpp"

using namespace otalign;
using namespace otalign::synth;

namespace {

SynthConfig small(std::uint64_t seed = 3) {
  SynthConfig c;
  c.seed = seed;
  c.stocks = 4;
  c.years = 1;
  c.days_per_year = 5;
  c.news_probability = 1.0;
  c.dim = 32;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("noiseless full planting gives a perfect matching of identical twins") {
  auto cfg = small();
  cfg.rho = 1.0;
  cfg.sigma = 0.0;
  cfg.sentences_min = cfg.sentences_max = 12;
  auto c = generate_corpus(cfg);
  auto groups = embed::group_by_bundle(c.sentences);
  REQUIRE(c.truth.size() == 20);
  for (const auto& t : c.truth) {
    CHECK(t.pairs.size() == 12);
    Mask m = t.mask();
    for (Eigen::Index i = 0; i < m.rows(); ++i) CHECK(m.row(i).cast<int>().sum() == 1);
    for (Eigen::Index j = 0; j < m.cols(); ++j) CHECK(m.col(j).cast<int>().sum() == 1);
    auto pair = embed::stack_bundle(groups.at(t.key));
    for (auto [i, j] : t.pairs) {
      CHECK((pair.english.row(static_cast<Eigen::Index>(i)) - pair.foreign.row(static_cast<Eigen::Index>(j))).norm() <
            1e-6);
    }
  }
}

TEST_CASE("no planting gives empty masks") {
  auto cfg = small();
  cfg.rho = 0.0;
  auto c = generate_corpus(cfg);
  for (const auto& t : c.truth) {
    CHECK(t.pairs.empty());
    CHECK(t.mask().cast<int>().sum() == 0);
  }
}

TEST_CASE("the same seed writes byte-identical files") {
  namespace fs = std::filesystem;
  auto base = fs::temp_directory_path() / "otalign_synth_test";
  fs::remove_all(base);
  auto a = write_corpus(generate_corpus(small(5)), base / "a");
  auto b = write_corpus(generate_corpus(small(5)), base / "b");
  auto c = write_corpus(generate_corpus(small(6)), base / "c");
  for (auto member : {&CorpusPaths::articles, &CorpusPaths::sentences, &CorpusPaths::returns, &CorpusPaths::truth,
                      &CorpusPaths::calendar}) {
    CHECK(slurp(a.*member) == slurp(b.*member));
  }
  CHECK(slurp(a.sentences) != slurp(c.sentences));
  fs::remove_all(base);
}

TEST_CASE("planted pair similarity falls as noise grows") {
  double previous = 2.0;
  for (double sigma : {0.0, 0.1, 0.3}) {
    auto cfg = small(11);
    cfg.sigma = sigma;
    cfg.stocks = 10;
    cfg.days_per_year = 20;
    cfg.dim = 128;
    auto c = generate_corpus(cfg);
    auto groups = embed::group_by_bundle(c.sentences);
    double sum = 0;
    std::size_t count = 0;
    for (const auto& t : c.truth) {
      auto pair = embed::stack_bundle(groups.at(t.key));
      for (auto [i, j] : t.pairs) {
        sum += pair.english.row(static_cast<Eigen::Index>(i)).dot(pair.foreign.row(static_cast<Eigen::Index>(j)));
        ++count;
      }
    }
    REQUIRE(count >= 1000);
    double mean = sum / static_cast<double>(count);
    if (sigma == 0.0) CHECK(mean > 1.0 - 1e-6);
    CHECK(mean < previous);
    previous = mean;
  }
}

TEST_CASE("generated files pass every loader check") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "otalign_synth_load";
  fs::remove_all(dir);
  auto corpus = generate_corpus(small(8));
  auto paths = write_corpus(corpus, dir);
  auto records = embed::read_sentence_records(paths.sentences.string(), 32);
  CHECK(records.size() == corpus.sentences.size());
  for (const auto& [key, recs] : embed::group_by_bundle(records)) CHECK_NOTHROW(embed::stack_bundle(recs));
  auto rets = scoring::read_returns(paths.returns.string());
  CHECK(rets.size() == 20);
  auto articles = corpus::read_raw_articles(paths.articles.string());
  std::ifstream cal_in(paths.calendar);
  auto cal = corpus::calendar_from_json(nlohmann::json::parse(cal_in));
  auto bundles = corpus::bundle_stock_days(articles, cal);
  CHECK(bundles.size() == corpus.truth.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    CHECK(bundles[i].ticker == corpus.truth[i].key.ticker);
    CHECK(bundles[i].trading_day == corpus.truth[i].key.trading_day);
  }
  std::ifstream truth_in(paths.truth);
  std::string line;
  std::getline(truth_in, line);
  auto t = truth_from_json(nlohmann::json::parse(line));
  CHECK(t.pairs == corpus.truth.front().pairs);
  fs::remove_all(dir);
}

TEST_CASE("returns load on planted content") {
  auto cfg = small(4);
  cfg.stocks = 20;
  cfg.days_per_year = 30;
  cfg.snr = 1.0;
  auto c = generate_corpus(cfg);
  std::map<embed::BundleKey, double> ret;
  for (const auto& r : c.returns) ret[{r.ticker, r.trading_day}] = r.ret_oc;
  auto groups = embed::group_by_bundle(c.sentences);
  std::vector<double> x, y;
  for (const auto& t : c.truth) {
    auto pair = embed::stack_bundle(groups.at(t.key));
    // planted minus unplanted English mean cancels the shared theme
    Vector planted = Vector::Zero(cfg.dim), rest = Vector::Zero(cfg.dim);
    std::vector<bool> is_planted(t.n, false);
    for (auto [i, j] : t.pairs) is_planted[i] = true;
    for (std::size_t i = 0; i < t.n; ++i)
      (is_planted[i] ? planted : rest) += pair.english.row(static_cast<Eigen::Index>(i)).transpose();
    auto k = static_cast<double>(t.pairs.size());
    if (t.pairs.empty() || t.pairs.size() == t.n) continue;
    x.push_back((planted / k - rest / (static_cast<double>(t.n) - k)).dot(c.signal_direction));
    y.push_back(ret.at(t.key));
  }
  Eigen::Map<Vector> xv(x.data(), static_cast<Eigen::Index>(x.size())), yv(y.data(), static_cast<Eigen::Index>(y.size()));
  Vector xc = xv.array() - xv.mean(), yc = yv.array() - yv.mean();
  CHECK(xc.dot(yc) / (xc.norm() * yc.norm()) > 0.4);
}

TEST_CASE("invalid synth settings are config errors") {
  auto bad = [](auto mutate) {
    auto c = small();
    mutate(c);
    try {
      generate_corpus(c);
    } catch (const Error& e) {
      return e.code() == ErrorCode::ConfigError;
    }
    return false;
  };
  CHECK(bad([](SynthConfig& c) { c.rho = 1.5; }));
  CHECK(bad([](SynthConfig& c) { c.sigma = -0.1; }));
  CHECK(bad([](SynthConfig& c) { c.sentences_max = 0; }));
  CHECK(bad([](SynthConfig& c) { c.signal_direction = std::vector<double>(3, 1.0); }));
}

TEST_CASE("synthetic trading days skip weekends") {
  auto days = synthetic_trading_days(2022, 10);
  REQUIRE(days.size() == 10);
  for (auto d : days) {
    std::chrono::weekday wd{std::chrono::sys_days{d}};
    CHECK(wd != std::chrono::Saturday);
    CHECK(wd != std::chrono::Sunday);
  }
  auto c = generate_corpus(small());
  CHECK_NOTHROW(c.calendar.validate());
  CHECK(std::chrono::sys_days{c.calendar.trading_days.front()} <
        std::chrono::sys_days{Date{std::chrono::year{2012}, std::chrono::January, std::chrono::day{4}}});
}
