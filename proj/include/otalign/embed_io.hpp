#pragma once

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include "error.hpp"
#include "text.hpp"
#include "timeutil.hpp"
#include "types.hpp"

namespace otalign::embed {

inline constexpr std::size_t kDefaultDim = 768;
inline constexpr double kNormTolerance = 1e-6;

struct SentenceRecord {
  std::string ticker;
  Date trading_day{};
  Language language = Language::E;
  std::size_t sentence_index = 0;
  std::string text;
  std::vector<float> embedding;

  friend bool operator==(const SentenceRecord&, const SentenceRecord&) = default;
};

/// Row i of `english` is English sentence i; likewise for `foreign`.
struct EmbeddingMatrixPair {
  Matrix english;  // n x d
  Matrix foreign;  // m x d
};

/// Key of a stock-day.
struct BundleKey {
  std::string ticker;
  Date trading_day{};

  friend bool operator==(const BundleKey&, const BundleKey&) = default;
  friend bool operator<(const BundleKey& a, const BundleKey& b) {
    if (a.ticker != b.ticker) return a.ticker < b.ticker;
    return std::chrono::sys_days{a.trading_day} < std::chrono::sys_days{b.trading_day};
  }
};

template <typename T>
Vector normalize_embedding(std::span<const T> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  double norm = out.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::DegenerateEmbedding, "cannot normalize a zero or non-finite vector");
  }
  return out / norm;
}

inline Vector normalize_embedding(const Vector& v) {
  return normalize_embedding(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

// ---------------------------------------------------------------------------
// base64 of little-endian float32

inline std::string encode_floats(std::span<const float> values) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<const char*, 6, 8>>;
  std::string bytes(values.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), values.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) std::reverse(bytes.begin() + i, bytes.begin() + i + 4);
  }
  std::string out(It(bytes.data()), It(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

inline std::vector<float> decode_floats(std::string_view b64) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<const char*>, 8, 6>;
  std::size_t pad = 0;
  while (!b64.empty() && b64.back() == '=') {
    b64.remove_suffix(1);
    ++pad;
  }
  std::string bytes;
  try {
    bytes.assign(It(b64.data()), It(b64.data() + b64.size()));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("invalid base64 embedding: ") + e.what());
  }
  // transform_width may emit a trailing partial byte
  bytes.resize(b64.size() * 6 / 8);
  if (bytes.size() % sizeof(float) != 0 || pad > 2) {
    throw Error(ErrorCode::SchemaError, "base64 embedding is not a whole number of float32 values");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) std::reverse(bytes.begin() + i, bytes.begin() + i + 4);
  }
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

// ---------------------------------------------------------------------------
// JSONL records

inline nlohmann::json to_json(const SentenceRecord& r, bool plain_array = false) {
  nlohmann::json j{{"ticker", r.ticker},
                   {"trading_day", format_date(r.trading_day)},
                   {"language", std::string(to_string(r.language))},
                   {"sentence_index", r.sentence_index},
                   {"text", r.text}};
  if (plain_array) {
    j["embedding"] = r.embedding;
  } else {
    j["embedding_b64"] = encode_floats(r.embedding);
  }
  return j;
}

inline SentenceRecord sentence_from_json(const nlohmann::json& j) {
  SentenceRecord r;
  try {
    r.ticker = j.at("ticker").get<std::string>();
    r.trading_day = parse_date(j.at("trading_day").get<std::string>());
    r.language = parse_language(j.at("language").get<std::string>());
    r.sentence_index = j.at("sentence_index").get<std::size_t>();
    r.text = j.at("text").get<std::string>();
    if (j.contains("embedding_b64")) {
      r.embedding = decode_floats(j.at("embedding_b64").get<std::string>());
    } else if (j.contains("embedding")) {
      r.embedding = j.at("embedding").get<std::vector<float>>();
    } else {
      throw Error(ErrorCode::SchemaError, "record has neither embedding_b64 nor embedding");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedInput) throw Error(ErrorCode::SchemaError, e.what());
    throw;
  }
  return r;
}

inline double embedding_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

/// Checks that sentence indices of every (ticker, day, language) are exactly 0..k-1.
inline void check_index_contiguity(const std::vector<SentenceRecord>& records) {
  std::map<std::tuple<BundleKey, Language>, std::vector<std::size_t>> seen;
  for (const auto& r : records) {
    seen[{BundleKey{r.ticker, r.trading_day}, r.language}].push_back(r.sentence_index);
  }
  for (auto& [key, idx] : seen) {
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] != i) {
        const auto& bk = std::get<0>(key);
        throw Error(ErrorCode::SchemaError,
                    "sentence indices of " + bk.ticker + " " + format_date(bk.trading_day) + " " +
                        std::string(to_string(std::get<1>(key))) + " are not contiguous from 0");
      }
    }
  }
}

inline std::vector<SentenceRecord> read_sentence_records(std::istream& in, std::size_t expected_dim,
                                                         const std::string& name = "<stream>") {
  std::vector<SentenceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    auto where = name + ":" + std::to_string(lineno);
    SentenceRecord r;
    try {
      r = sentence_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
    if (r.embedding.size() != expected_dim) {
      throw Error(ErrorCode::SchemaError, where + ": embedding has dim " +
                                              std::to_string(r.embedding.size()) + ", expected " +
                                              std::to_string(expected_dim));
    }
    double norm = embedding_norm(r.embedding);
    if (!(std::abs(norm - 1.0) <= kNormTolerance)) {
      throw Error(ErrorCode::NormError,
                  where + ": embedding norm " + std::to_string(norm) + " is not 1 within 1e-6");
    }
    out.push_back(std::move(r));
  }
  check_index_contiguity(out);
  return out;
}

inline std::vector<SentenceRecord> read_sentence_records(const std::string& path,
                                                         std::size_t expected_dim = kDefaultDim) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StageDependencyError, "cannot open sentence file " + path);
  return read_sentence_records(in, expected_dim, path);
}

inline void write_sentence_records(std::ostream& out, const std::vector<SentenceRecord>& records,
                                   bool plain_array = false) {
  for (const auto& r : records) out << to_json(r, plain_array).dump() << '\n';
}

inline void write_sentence_records(const std::string& path, const std::vector<SentenceRecord>& records,
                                   bool plain_array = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::StageDependencyError, "cannot write " + path);
  write_sentence_records(out, records, plain_array);
}

/// Groups records by stock-day; output is ordered by (ticker, day).
inline std::map<BundleKey, std::vector<SentenceRecord>> group_by_bundle(
    std::vector<SentenceRecord> records) {
  std::map<BundleKey, std::vector<SentenceRecord>> out;
  for (auto& r : records) {
    BundleKey key{r.ticker, r.trading_day};
    out[key].push_back(std::move(r));
  }
  return out;
}

/// Stacks one stock-day's records into row-per-sentence matrices ordered by
/// sentence_index; input order does not matter.
inline EmbeddingMatrixPair stack_bundle(std::span<const SentenceRecord> records) {
  std::array<std::vector<const SentenceRecord*>, 2> sides;
  std::size_t dim = records.empty() ? 0 : records.front().embedding.size();
  for (const auto& r : records) {
    if (r.embedding.size() != dim) throw Error(ErrorCode::SchemaError, "mixed embedding dims in bundle");
    sides[index_of(r.language)].push_back(&r);
  }
  if (sides[0].empty() || sides[1].empty()) {
    throw Error(ErrorCode::IncompleteBundle, "bundle is missing one language side");
  }
  auto stack = [dim](std::vector<const SentenceRecord*>& rows) {
    std::sort(rows.begin(), rows.end(),
              [](auto* a, auto* b) { return a->sentence_index < b->sentence_index; });
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i]->sentence_index != i) {
        throw Error(ErrorCode::SchemaError, "sentence indices are not contiguous from 0");
      }
      for (std::size_t k = 0; k < dim; ++k) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i]->embedding[k];
      }
    }
    return m;
  };
  return EmbeddingMatrixPair{stack(sides[0]), stack(sides[1])};
}

}  // namespace otalign::embed
