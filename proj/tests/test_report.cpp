#include "catch_amalgamated.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

#include "otalign/report.hpp"

using namespace otalign;
using namespace otalign::report;
using Catch::Matchers::WithinAbs;

namespace {

Date day_of(int year, int index) {
  using namespace std::chrono;
  return Date{sys_days{Date{std::chrono::year{year}, January, day{2}}} + days{index}};
}

Matrix random_unit_rows(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index dim) {
  std::normal_distribution<double> g;
  Matrix m(rows, dim);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) m(i, k) = g(rng);
    m.row(i).normalize();
  }
  return m;
}

// Share of total mass held by the ceil(5%) largest entries.
double top_mass_share(const Matrix& m) {
  std::vector<double> v(m.data(), m.data() + m.size());
  std::sort(v.begin(), v.end(), std::greater<>());
  auto k = static_cast<std::size_t>(ot::top_count(0.05, m.size()));
  double top = 0;
  for (std::size_t i = 0; i < k; ++i) top += v[i];
  return top / m.sum();
}

}  // namespace

TEST_CASE("identical aggregates have similarity one, orthogonal ones zero") {
  scoring::StockDayFeatures a{{"A", day_of(2020, 0)}, {}}, b{{"B", day_of(2020, 0)}, {}};
  Vector x = Vector::Unit(4, 0), y = Vector::Unit(4, 1);
  a.at(Language::E, Kind::Full) = x;
  a.at(Language::F, Kind::Full) = x;
  b.at(Language::E, Kind::Full) = x;
  b.at(Language::F, Kind::Full) = y;
  CHECK_THAT(cosine(x, x), WithinAbs(1.0, 1e-15));
  CHECK_THAT(cosine(x, y), WithinAbs(0.0, 1e-15));

  auto rows = similarity_table({a, b});
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].kind == Kind::Full);
  REQUIRE(rows[2].stats);
  CHECK(rows[2].stats->count == 2);
  CHECK_THAT(rows[2].stats->mean, WithinAbs(0.5, 1e-15));
  CHECK_FALSE(rows[0].stats);
  CHECK(rows[0].skipped == 2);
}

TEST_CASE("a score equal to the return correlates perfectly") {
  std::vector<scoring::ReturnObservation> rets;
  std::vector<scoring::ScoreRecord> scores;
  for (int i = 0; i < 10; ++i) {
    double r = std::sin(i) / 100;
    rets.push_back({"S" + std::to_string(i), day_of(2020, i), r});
    scores.push_back({"S" + std::to_string(i), day_of(2020, i), Language::F, Kind::Aligned, r, 2019, {}});
    scores.push_back({"S" + std::to_string(i), day_of(2020, i), Language::E, Kind::Full, -2 * r + 1, 2019, {}});
  }
  auto c = correlation_matrix(scores, rets);
  CHECK_THAT(*c[0][4], WithinAbs(1.0, 1e-12));
  CHECK_THAT(*c[0][3], WithinAbs(-1.0, 1e-12));
  CHECK_FALSE(c[0][1].has_value());
}

TEST_CASE("independent series are nearly uncorrelated") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<scoring::ReturnObservation> rets;
  std::vector<scoring::ScoreRecord> scores;
  for (int i = 0; i < 10000; ++i) {
    std::string t = "S" + std::to_string(i % 100);
    Date d = day_of(2020, i / 100);
    rets.push_back({t, d, 0.01 * g(rng)});
    for (auto l : kLanguages)
      for (auto k : kKinds) scores.push_back({t, d, l, k, g(rng), 2019, {}});
  }
  auto c = correlation_matrix(scores, rets);
  for (std::size_t a = 0; a < kCorrVars; ++a) {
    CHECK(*c[a][a] == 1.0);
    for (std::size_t b = 0; b < kCorrVars; ++b) {
      REQUIRE(c[a][b].has_value());
      CHECK(*c[a][b] == *c[b][a]);
      if (a != b) CHECK(std::abs(*c[a][b]) < 0.05);
    }
  }
}

TEST_CASE("cells with fewer than three pairs are absent") {
  std::vector<scoring::ReturnObservation> rets{{"A", day_of(2020, 0), 0.01}, {"B", day_of(2020, 0), 0.02}};
  std::vector<scoring::ScoreRecord> scores{{"A", day_of(2020, 0), Language::E, Kind::Aligned, 1, 2019, {}},
                                           {"B", day_of(2020, 0), Language::E, Kind::Aligned, 2, 2019, {}}};
  auto c = correlation_matrix(scores, rets);
  CHECK_FALSE(c[0][1].has_value());
  CHECK(correlation_labels()[1] == "Soft_E_A");
  CHECK(correlation_labels()[6] == "Soft_F_Full");
}

TEST_CASE("coverage of a fully aligned stock-day") {
  auto y = coverage_series({{"A", day_of(2020, 0), 3, 3, 3, 3, 3, true}});
  REQUIRE(y.size() == 1);
  CHECK(y[0].aligned_share_english == 1.0);
  CHECK(y[0].unaligned_share_english == 0.0);
  CHECK(y[0].with_aligned == 1);
  CHECK(y[0].with_unaligned == 0);
}

TEST_CASE("coverage of an empty mask") {
  auto y = coverage_series({{"A", day_of(2020, 0), 4, 5, 0, 0, 0, false}});
  CHECK(y[0].aligned_share_english == 0.0);
  CHECK(y[0].aligned_share_foreign == 0.0);
  CHECK(y[0].with_aligned == 0);
  CHECK(y[0].with_unaligned == 1);
  CHECK(y[0].not_converged == 1);
}

TEST_CASE("coverage averages shares within a year") {
  auto y = coverage_series({{"A", day_of(2020, 0), 10, 10, 2, 2, 2, true},
                            {"B", day_of(2020, 5), 5, 5, 3, 3, 3, true},
                            {"C", day_of(2021, 0), 4, 4, 1, 1, 1, true}});
  REQUIRE(y.size() == 2);
  CHECK_THAT(y[0].aligned_share_english, WithinAbs(0.4, 1e-15));
  CHECK_THAT(y[0].aligned_share_english + y[0].unaligned_share_english, WithinAbs(1.0, 1e-15));
  CHECK(y[1].year == 2021);
}

TEST_CASE("a 2x2 heatmap bundle holds four matrices and round-trips") {
  Matrix xi(2, 2);
  xi << 0.9, 0.1, 0.2, 0.8;
  Matrix gamma = ot::sinkhorn(ot::cost_matrix(Matrix::Identity(2, 2), Matrix::Identity(2, 2))).gamma;
  auto h = heatmap_dump(xi, gamma);
  h.ticker = "7203";
  h.trading_day = day_of(2020, 3);
  h.english_sentences = {"a", "b"};
  h.foreign_sentences = {"c", "d"};
  for (const Matrix* m : {&h.similarity, &h.gamma, &h.softmax, &h.entmax15}) {
    CHECK(m->rows() == 2);
    CHECK(m->cols() == 2);
  }
  auto back = heatmap_from_json(nlohmann::json::parse(to_json(h).dump()));
  CHECK(back.similarity == h.similarity);
  CHECK(back.gamma == h.gamma);
  CHECK(back.softmax == h.softmax);
  CHECK(back.entmax15 == h.entmax15);
  CHECK(back.english_sentences == h.english_sentences);
  CHECK(back.ticker == "7203");
}

TEST_CASE("transport plans concentrate more mass than softmax") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> size(5, 40);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix e = random_unit_rows(rng, size(rng), 64), f = random_unit_rows(rng, size(rng), 64);
    auto cost = ot::cost_matrix(e, f);
    auto h = heatmap_dump(cost.similarity, ot::sinkhorn(cost).gamma);
    CHECK(top_mass_share(h.gamma) > top_mass_share(h.softmax));
  }
}
