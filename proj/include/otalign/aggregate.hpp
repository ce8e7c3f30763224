#pragma once

#include <array>
#include <optional>
#include <vector>

#include "embed_io.hpp"
#include "types.hpp"

namespace otalign::aggregate {

/// Sentence indices (per language) that take part in at least one aligned pair.
struct AlignedSets {
  std::vector<Eigen::Index> english;
  std::vector<Eigen::Index> foreign;
  Eigen::Index n = 0;  // English sentence count
  Eigen::Index m = 0;  // foreign sentence count

  std::vector<Eigen::Index> unaligned_english() const { return complement(english, n); }
  std::vector<Eigen::Index> unaligned_foreign() const { return complement(foreign, m); }

 private:
  static std::vector<Eigen::Index> complement(const std::vector<Eigen::Index>& in, Eigen::Index size) {
    std::vector<bool> hit(static_cast<std::size_t>(size), false);
    for (auto i : in) hit[static_cast<std::size_t>(i)] = true;
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < size; ++i) {
      if (!hit[static_cast<std::size_t>(i)]) out.push_back(i);
    }
    return out;
  }
};

inline AlignedSets split_aligned_sets(const Mask& mask) {
  AlignedSets s;
  s.n = mask.rows();
  s.m = mask.cols();
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    if (mask.row(i).any()) s.english.push_back(i);
  }
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    if (mask.col(j).any()) s.foreign.push_back(j);
  }
  return s;
}

enum class AbsentReason { None, NoSentences, ZeroMean };

struct AggregatedVector {
  std::optional<Vector> vector;  // unit length when present
  std::size_t count = 0;         // contributing sentences
  double raw_norm = 0.0;         // norm of the plain mean before re-normalization
  AbsentReason absent = AbsentReason::None;

  bool present() const { return vector.has_value(); }
};

/// Six vectors indexed by [language][kind].
struct AggregatedEmbeddings {
  std::array<std::array<AggregatedVector, 3>, 2> slots;

  const AggregatedVector& at(Language l, Kind k) const { return slots[index_of(l)][index_of(k)]; }
  AggregatedVector& at(Language l, Kind k) { return slots[index_of(l)][index_of(k)]; }
};

inline constexpr double kZeroMeanNorm = 1e-12;

/// Plain mean of the selected rows, re-normalized to unit length.
inline AggregatedVector mean_of_rows(const Matrix& rows, const std::vector<Eigen::Index>& members) {
  AggregatedVector out;
  out.count = members.size();
  if (members.empty()) {
    out.absent = AbsentReason::NoSentences;
    return out;
  }
  Vector mean = Vector::Zero(rows.cols());
  for (auto i : members) mean += rows.row(i).transpose();
  mean /= static_cast<double>(members.size());
  out.raw_norm = mean.norm();
  if (!(out.raw_norm > kZeroMeanNorm)) {
    out.absent = AbsentReason::ZeroMean;
    return out;
  }
  out.vector = mean / out.raw_norm;
  return out;
}

inline AggregatedEmbeddings aggregate_embeddings(const embed::EmbeddingMatrixPair& pair,
                                                 const AlignedSets& sets) {
  if (sets.n != pair.english.rows() || sets.m != pair.foreign.rows()) {
    throw Error(ErrorCode::SchemaError, "aligned sets do not match the embedding shapes");
  }
  auto all = [](Eigen::Index size) {
    std::vector<Eigen::Index> v(static_cast<std::size_t>(size));
    for (Eigen::Index i = 0; i < size; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
  };
  AggregatedEmbeddings agg;
  agg.at(Language::E, Kind::Aligned) = mean_of_rows(pair.english, sets.english);
  agg.at(Language::E, Kind::Unaligned) = mean_of_rows(pair.english, sets.unaligned_english());
  agg.at(Language::E, Kind::Full) = mean_of_rows(pair.english, all(sets.n));
  agg.at(Language::F, Kind::Aligned) = mean_of_rows(pair.foreign, sets.foreign);
  agg.at(Language::F, Kind::Unaligned) = mean_of_rows(pair.foreign, sets.unaligned_foreign());
  agg.at(Language::F, Kind::Full) = mean_of_rows(pair.foreign, all(sets.m));
  return agg;
}

}  // namespace otalign::aggregate
