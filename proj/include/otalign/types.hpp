#pragma once

#include <Eigen/Dense>

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

#include "error.hpp"

namespace otalign {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

using Date = std::chrono::year_month_day;

/// English side of a bundle is always E; the paired non-English side is F.
enum class Language : std::uint8_t { E, F };

/// Which sentences an aggregated embedding averages over.
enum class Kind : std::uint8_t { Aligned, Unaligned, Full };

inline constexpr std::array<Language, 2> kLanguages{Language::E, Language::F};
inline constexpr std::array<Kind, 3> kKinds{Kind::Aligned, Kind::Unaligned, Kind::Full};

constexpr std::string_view to_string(Language l) { return l == Language::E ? "E" : "F"; }

constexpr std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::Aligned: return "A";
    case Kind::Unaligned: return "UA";
    case Kind::Full: return "Full";
  }
  return "?";
}

inline Language parse_language(std::string_view s) {
  if (s == "E") return Language::E;
  if (s == "F") return Language::F;
  throw Error(ErrorCode::SchemaError, "language must be E or F, got '" + std::string(s) + "'");
}

inline Kind parse_kind(std::string_view s) {
  if (s == "A") return Kind::Aligned;
  if (s == "UA") return Kind::Unaligned;
  if (s == "Full") return Kind::Full;
  throw Error(ErrorCode::SchemaError, "kind must be A, UA or Full, got '" + std::string(s) + "'");
}

constexpr std::size_t index_of(Language l) { return static_cast<std::size_t>(l); }
constexpr std::size_t index_of(Kind k) { return static_cast<std::size_t>(k); }

}  // namespace otalign
