#include "catch_amalgamated.hpp"

#include <random>

#include "otalign/aggregate.hpp"

using namespace otalign;
using namespace otalign::aggregate;
using Catch::Matchers::WithinAbs;

namespace {

Matrix random_unit_rows(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index dim) {
  std::normal_distribution<double> g;
  Matrix m(rows, dim);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) m(i, k) = g(rng);
    m.row(i).normalize();
  }
  return m;
}

using Idx = std::vector<Eigen::Index>;

}  // namespace

TEST_CASE("identity mask aligns everything") {
  auto s = split_aligned_sets(Mask::Identity(2, 2));
  CHECK(s.english == Idx{0, 1});
  CHECK(s.foreign == Idx{0, 1});
  CHECK(s.unaligned_english().empty());
  CHECK(s.unaligned_foreign().empty());
}

TEST_CASE("empty mask leaves everything unaligned") {
  auto s = split_aligned_sets(Mask::Zero(3, 2));
  CHECK(s.english.empty());
  CHECK(s.foreign.empty());
  CHECK(s.unaligned_english() == Idx{0, 1, 2});
  CHECK(s.unaligned_foreign() == Idx{0, 1});
}

TEST_CASE("sets read off a sparse mask") {
  Mask m = Mask::Zero(3, 2);
  m(0, 1) = 1;
  m(2, 1) = 1;
  auto s = split_aligned_sets(m);
  CHECK(s.english == Idx{0, 2});
  CHECK(s.foreign == Idx{1});
  CHECK(s.unaligned_english() == Idx{1});
  CHECK(s.unaligned_foreign() == Idx{0});
}

TEST_CASE("single sentence full vector equals the row") {
  embed::EmbeddingMatrixPair pair;
  pair.english = Matrix(1, 3);
  pair.english << 0.6, 0.8, 0.0;
  pair.foreign = Matrix::Identity(2, 3);
  auto agg = aggregate_embeddings(pair, split_aligned_sets(Mask::Zero(1, 2)));
  const auto& full = agg.at(Language::E, Kind::Full);
  REQUIRE(full.present());
  CHECK((*full.vector - pair.english.row(0).transpose()).norm() < 1e-15);
  CHECK(full.count == 1);
  CHECK_FALSE(agg.at(Language::E, Kind::Aligned).present());
  CHECK(agg.at(Language::E, Kind::Aligned).absent == AbsentReason::NoSentences);
}

TEST_CASE("antipodal rows give an absent zero mean") {
  Matrix rows(2, 3);
  rows << 1, 0, 0, -1, 0, 0;
  auto v = mean_of_rows(rows, {0, 1});
  CHECK_FALSE(v.present());
  CHECK(v.absent == AbsentReason::ZeroMean);
  CHECK(v.count == 2);
}

TEST_CASE("mean of two basis rows is re-normalized") {
  Matrix rows(2, 4);
  rows << 1, 0, 0, 0, 0, 1, 0, 0;
  auto v = mean_of_rows(rows, {0, 1});
  REQUIRE(v.present());
  CHECK_THAT((*v.vector)[0], WithinAbs(std::sqrt(2.0) / 2, 1e-15));
  CHECK_THAT((*v.vector)[1], WithinAbs(std::sqrt(2.0) / 2, 1e-15));
  CHECK_THAT(v.raw_norm, WithinAbs(std::sqrt(0.5), 1e-15));
}

TEST_CASE("counts partition each language") {
  std::mt19937_64 rng(4);
  embed::EmbeddingMatrixPair pair{random_unit_rows(rng, 6, 8), random_unit_rows(rng, 4, 8)};
  Mask m = Mask::Zero(6, 4);
  m(1, 0) = m(4, 3) = m(5, 3) = 1;
  auto agg = aggregate_embeddings(pair, split_aligned_sets(m));
  for (auto l : kLanguages) {
    const auto& a = agg.at(l, Kind::Aligned);
    const auto& u = agg.at(l, Kind::Unaligned);
    const auto& f = agg.at(l, Kind::Full);
    CHECK(a.count + u.count == f.count);
    CHECK(f.present());
  }
  CHECK(agg.at(Language::E, Kind::Aligned).count == 3);
  CHECK(agg.at(Language::F, Kind::Aligned).count == 2);
}

TEST_CASE("fully aligned stock-day: aligned equals full, unaligned absent") {
  std::mt19937_64 rng(5);
  embed::EmbeddingMatrixPair pair{random_unit_rows(rng, 3, 8), random_unit_rows(rng, 3, 8)};
  auto agg = aggregate_embeddings(pair, split_aligned_sets(Mask::Identity(3, 3)));
  for (auto l : kLanguages) {
    CHECK((*agg.at(l, Kind::Aligned).vector - *agg.at(l, Kind::Full).vector).norm() < 1e-15);
    CHECK_FALSE(agg.at(l, Kind::Unaligned).present());
  }
}

TEST_CASE("permuting rows together with the mask leaves the vectors unchanged") {
  std::mt19937_64 rng(6);
  embed::EmbeddingMatrixPair pair{random_unit_rows(rng, 5, 8), random_unit_rows(rng, 4, 8)};
  Mask m = Mask::Zero(5, 4);
  m(0, 2) = m(3, 1) = 1;
  std::vector<int> pe{4, 2, 0, 1, 3}, pf{3, 0, 2, 1};
  embed::EmbeddingMatrixPair perm{Matrix(5, 8), Matrix(4, 8)};
  Mask pm = Mask::Zero(5, 4);
  for (int i = 0; i < 5; ++i) perm.english.row(pe[static_cast<std::size_t>(i)]) = pair.english.row(i);
  for (int j = 0; j < 4; ++j) perm.foreign.row(pf[static_cast<std::size_t>(j)]) = pair.foreign.row(j);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) pm(pe[static_cast<std::size_t>(i)], pf[static_cast<std::size_t>(j)]) = m(i, j);
  auto a = aggregate_embeddings(pair, split_aligned_sets(m));
  auto b = aggregate_embeddings(perm, split_aligned_sets(pm));
  for (auto l : kLanguages) {
    for (auto k : kKinds) {
      REQUIRE(a.at(l, k).present() == b.at(l, k).present());
      if (a.at(l, k).present()) CHECK((*a.at(l, k).vector - *b.at(l, k).vector).norm() < 1e-14);
    }
  }
}

TEST_CASE("aggregate rejects sets that do not match the shapes") {
  embed::EmbeddingMatrixPair pair{Matrix::Identity(2, 3), Matrix::Identity(2, 3)};
  CHECK_THROWS_AS(aggregate_embeddings(pair, split_aligned_sets(Mask::Zero(3, 2))), Error);
}
