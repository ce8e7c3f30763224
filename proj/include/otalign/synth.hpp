#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embed_io.hpp"
#include "error.hpp"
#include "scoring.hpp"
#include "timeutil.hpp"
#include "types.hpp"

namespace otalign::synth {

struct SynthConfig {
  std::uint64_t seed = 7;
  int stocks = 30;
  int first_year = 2012;
  int years = 6;
  int days_per_year = 60;
  double news_probability = 0.9;  // chance a stock-day has bilingual news
  int sentences_min = 10;
  int sentences_max = 30;
  double rho = 0.5;           // fraction of sentences planted as translation pairs
  double sigma = 0.1;         // twin noise; cosine of a pair is about 1/sqrt(1 + sigma^2)
  double theme_weight = 0.5;  // shared stock-day theme in every sentence
  double snr = 1.0;           // signal variance over noise variance of returns
  double return_noise = 0.01;
  int dim = 768;
  std::optional<std::vector<double>> signal_direction;  // unit; drawn from the seed when absent

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, "synth." + what); };
    if (!(rho >= 0.0 && rho <= 1.0)) fail("rho must be in [0, 1]");
    if (!(sigma >= 0.0)) fail("sigma must be >= 0");
    if (stocks < 1 || years < 1 || days_per_year < 1) fail("stocks, years, days_per_year must be >= 1");
    if (sentences_min < 1 || sentences_max < sentences_min) fail("sentence range is invalid");
    if (dim < 2) fail("dim must be >= 2");
    if (!(snr >= 0.0) || !(return_noise > 0.0)) fail("snr must be >= 0 and return_noise > 0");
    if (!(news_probability > 0.0 && news_probability <= 1.0)) fail("news_probability must be in (0, 1]");
    if (signal_direction && static_cast<int>(signal_direction->size()) != dim) fail("signal_direction has wrong dim");
  }
};

struct GroundTruth {
  embed::BundleKey key;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (english, foreign)

  Mask mask() const {
    Mask out = Mask::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (auto [i, j] : pairs) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1;
    return out;
  }
};

struct SynthCorpus {
  std::vector<embed::SentenceRecord> sentences;
  std::vector<scoring::ReturnObservation> returns;
  std::vector<GroundTruth> truth;
  std::vector<corpus::RawArticle> articles;
  corpus::ExchangeCalendar calendar;
  Vector signal_direction;
};

inline std::string ticker_name(int s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%04d", s);
  return buf;
}

/// First `count` weekdays of `year`, starting on January 4th.
inline std::vector<Date> synthetic_trading_days(int year, int count) {
  using namespace std::chrono;
  std::vector<Date> out;
  for (sys_days d{Date{std::chrono::year{year}, January, day{4}}}; static_cast<int>(out.size()) < count;
       d += days{1}) {
    weekday wd{d};
    if (wd == Saturday || wd == Sunday) continue;
    out.emplace_back(d);
  }
  return out;
}

namespace detail {

class Sampler {
 public:
  Sampler(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    rng_.seed(seq);
  }

  Vector gaussian(int dim, double scale) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal_(rng_) * scale;
    return v;
  }

  Vector unit(int dim) {
    Vector v = gaussian(dim, 1.0);
    return v / v.norm();
  }

  double normal() { return normal_(rng_); }
  double uniform() { return uniform_(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline std::vector<float> to_float(const Vector& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

inline std::string article_body(const std::vector<std::string>& sentences) {
  std::string body;
  for (const auto& s : sentences) {
    if (!body.empty()) body += ' ';
    body += s;
  }
  return body;
}

}  // namespace detail

/// Bilingual corpus with planted translation pairs and planted return signal.
/// Every sentence is normalize(theme_weight * theme + content) with a
/// stock-day theme and a random unit content vector; a rho share of
/// sentences gets a foreign twin normalize(english + sigma * g / sqrt(d)).
/// Returns load on the mean content vector of the planted English
/// sentences, so only aligned content carries signal.
inline SynthCorpus generate_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const int d = cfg.dim;
  const double noise_scale = cfg.sigma / std::sqrt(static_cast<double>(d));
  SynthCorpus out;

  detail::Sampler global(cfg.seed, 0);
  if (cfg.signal_direction) {
    out.signal_direction = Eigen::Map<const Vector>(cfg.signal_direction->data(), d);
    out.signal_direction.normalize();
  } else {
    out.signal_direction = global.unit(d);
  }

  std::vector<Date> days;
  {
    // the last weekday before the first synthetic day opens the first window
    namespace chr = std::chrono;
    chr::sys_days open{Date{chr::year{cfg.first_year}, chr::January, chr::day{3}}};
    while (chr::weekday{open} == chr::Saturday || chr::weekday{open} == chr::Sunday)
      open -= chr::days{1};
    days.emplace_back(open);
  }
  for (int y = 0; y < cfg.years; ++y) {
    auto yd = synthetic_trading_days(cfg.first_year + y, cfg.days_per_year);
    days.insert(days.end(), yd.begin(), yd.end());
  }
  out.calendar.exchange = "SYN";
  out.calendar.market_open = std::chrono::minutes{9 * 60};
  out.calendar.utc_offset = std::chrono::minutes{9 * 60};
  out.calendar.trading_days = days;

  struct PendingReturn {
    std::string ticker;
    Date day;
    double signal;
    double noise;
  };
  std::vector<PendingReturn> pending;

  for (int s = 0; s < cfg.stocks; ++s) {
    detail::Sampler rng(cfg.seed, static_cast<std::uint64_t>(s) + 1);
    const std::string ticker = ticker_name(s);
    for (std::size_t di = 1; di < days.size(); ++di) {
      const Date day = days[di];
      const std::string date = format_date(day);
      double noise = rng.normal();
      double signal = 0.0;
      if (rng.uniform() >= cfg.news_probability) {
        pending.push_back({ticker, day, 0.0, noise});
        continue;
      }
      const int n = rng.integer(cfg.sentences_min, cfg.sentences_max);
      const int m = rng.integer(cfg.sentences_min, cfg.sentences_max);
      const int k = static_cast<int>(std::lround(cfg.rho * std::min(n, m)));
      const Vector theme = rng.unit(d) * cfg.theme_weight;

      std::vector<int> e_order(static_cast<std::size_t>(n)), f_order(static_cast<std::size_t>(m));
      std::iota(e_order.begin(), e_order.end(), 0);
      std::iota(f_order.begin(), f_order.end(), 0);
      std::shuffle(e_order.begin(), e_order.end(), rng.engine());
      std::shuffle(f_order.begin(), f_order.end(), rng.engine());

      std::vector<Vector> english(static_cast<std::size_t>(n)), foreign(static_cast<std::size_t>(m));
      std::vector<Vector> content(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        content[static_cast<std::size_t>(i)] = rng.unit(d);
        english[static_cast<std::size_t>(i)] = (theme + content[static_cast<std::size_t>(i)]).normalized();
      }
      GroundTruth truth{{ticker, day}, static_cast<std::size_t>(n), static_cast<std::size_t>(m), {}};
      std::vector<bool> filled(static_cast<std::size_t>(m), false);
      Vector carrier = Vector::Zero(d);
      for (int p = 0; p < k; ++p) {
        auto i = static_cast<std::size_t>(e_order[static_cast<std::size_t>(p)]);
        auto j = static_cast<std::size_t>(f_order[static_cast<std::size_t>(p)]);
        foreign[j] = (english[i] + rng.gaussian(d, noise_scale)).normalized();
        filled[j] = true;
        truth.pairs.emplace_back(i, j);
        carrier += content[i];
      }
      for (int j = 0; j < m; ++j) {
        if (!filled[static_cast<std::size_t>(j)]) foreign[static_cast<std::size_t>(j)] = (theme + rng.unit(d)).normalized();
      }
      std::sort(truth.pairs.begin(), truth.pairs.end());
      if (k > 0) signal = (carrier / k).dot(out.signal_direction);

      std::vector<std::string> e_text, f_text;
      for (int i = 0; i < n; ++i) {
        std::string text = "English sentence " + std::to_string(i) + " about " + ticker + " on " + date + ".";
        out.sentences.push_back({ticker, day, Language::E, static_cast<std::size_t>(i), text,
                                 detail::to_float(english[static_cast<std::size_t>(i)])});
        e_text.push_back(std::move(text));
      }
      for (int j = 0; j < m; ++j) {
        std::string text = "Foreign sentence " + std::to_string(j) + " about " + ticker + " on " + date + ".";
        out.sentences.push_back({ticker, day, Language::F, static_cast<std::size_t>(j), text,
                                 detail::to_float(foreign[static_cast<std::size_t>(j)])});
        f_text.push_back(std::move(text));
      }
      out.truth.push_back(std::move(truth));

      // Published at 08:00 local, inside this day's news window.
      using namespace std::chrono;
      Timestamp ts{time_point_cast<milliseconds>(sys_days{day} + hours{8} - out.calendar.utc_offset),
                   out.calendar.utc_offset};
      std::string story = ticker + "-" + date;
      out.articles.push_back({story + "-en", ts, "en", ticker, 90, detail::article_body(e_text)});
      out.articles.push_back({story + "-ja", ts, "ja", ticker, 90, detail::article_body(f_text)});
      pending.push_back({ticker, day, signal, noise});
    }
  }

  double sum = 0.0, sum_sq = 0.0;
  for (const auto& p : pending) {
    sum += p.signal;
    sum_sq += p.signal * p.signal;
  }
  const double count = static_cast<double>(pending.size());
  const double var = std::max(sum_sq / count - (sum / count) * (sum / count), 0.0);
  const double scale = var > 0.0 ? std::sqrt(cfg.snr) * cfg.return_noise / std::sqrt(var) : 0.0;
  for (const auto& p : pending) {
    out.returns.push_back({p.ticker, p.day, scale * p.signal + cfg.return_noise * p.noise});
  }
  return out;
}

inline nlohmann::json to_json(const GroundTruth& t) {
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [i, j] : t.pairs) pairs.push_back({i, j});
  return {{"ticker", t.key.ticker}, {"trading_day", format_date(t.key.trading_day)}, {"n", t.n}, {"m", t.m},
          {"pairs", pairs}};
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
  GroundTruth t{{j.at("ticker").get<std::string>(), parse_date(j.at("trading_day").get<std::string>())},
                j.at("n").get<std::size_t>(), j.at("m").get<std::size_t>(), {}};
  for (const auto& p : j.at("pairs")) t.pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
  return t;
}

struct CorpusPaths {
  std::filesystem::path articles, sentences, returns, truth, calendar;
};

inline CorpusPaths corpus_paths(const std::filesystem::path& dir) {
  return {dir / "articles.jsonl", dir / "sentences.jsonl", dir / "returns.csv", dir / "truth.jsonl",
          dir / "calendar.json"};
}

/// Writes the corpus in the same formats the pipeline reads, plus truth.jsonl.
inline CorpusPaths write_corpus(const SynthCorpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto paths = corpus_paths(dir);
  {
    std::ofstream out(paths.articles, std::ios::binary);
    for (const auto& a : c.articles) out << corpus::to_json(a).dump() << '\n';
  }
  embed::write_sentence_records(paths.sentences.string(), c.sentences);
  scoring::write_returns(paths.returns.string(), c.returns);
  {
    std::ofstream out(paths.truth, std::ios::binary);
    for (const auto& t : c.truth) out << to_json(t).dump() << '\n';
  }
  {
    std::ofstream out(paths.calendar, std::ios::binary);
    out << corpus::calendar_to_json(c.calendar).dump(2) << '\n';
  }
  return paths;
}

}  // namespace otalign::synth
