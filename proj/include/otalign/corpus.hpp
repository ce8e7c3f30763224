#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "error.hpp"
#include "text.hpp"
#include "timeutil.hpp"
#include "types.hpp"

namespace otalign::corpus {

struct RawArticle {
  std::string story_id;
  Timestamp publish_time;
  std::string language;  // ISO code, e.g. "en", "ja"
  std::string ticker;
  int ticker_score = 0;
  std::string body;
};

struct CleanArticle {
  std::string story_id;
  Timestamp publish_time;
  Date trading_day{};  // filled in by bundle_stock_days
  std::string language;
  std::string ticker;
  std::string body;
};

struct StockDayBundle {
  std::string ticker;
  Date trading_day{};
  std::string english_text;
  std::string foreign_text;
  std::vector<std::string> source_story_ids;

  friend bool operator==(const StockDayBundle&, const StockDayBundle&) = default;
};

enum class RejectReason { TooShort, TooLong, EmptyAfterClean };

constexpr std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::TooShort: return "TooShort";
    case RejectReason::TooLong: return "TooLong";
    case RejectReason::EmptyAfterClean: return "EmptyAfterClean";
  }
  return "?";
}

struct CleaningRules {
  /// A line matching any of these (ECMAScript, searched) is dropped as header/footer.
  std::vector<std::string> boilerplate_patterns;
  std::size_t min_length = 100;
  std::size_t max_length = 100'000;
};

using CleanResult = std::variant<CleanArticle, RejectReason>;

namespace detail {

inline std::vector<std::regex> compile(const std::vector<std::string>& patterns) {
  std::vector<std::regex> out;
  out.reserve(patterns.size());
  for (const auto& p : patterns) {
    try {
      out.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::ConfigError, "bad boilerplate pattern '" + p + "': " + e.what());
    }
  }
  return out;
}

inline std::string clean_body(std::string_view body, const std::vector<std::regex>& boilerplate) {
  std::string normalized;
  normalized.reserve(body.size());
  for (char c : body) {
    if (c != '\r') normalized.push_back(c);
  }

  std::vector<std::string> paragraphs;
  std::string current;
  bool open = false;
  auto flush = [&] {
    if (open) paragraphs.push_back(std::move(current));
    current.clear();
    open = false;
  };
  for (std::string_view line : text::split_lines(normalized)) {
    bool drop = std::any_of(boilerplate.begin(), boilerplate.end(), [&](const std::regex& re) {
      return std::regex_search(line.begin(), line.end(), re);
    });
    if (drop) continue;
    if (text::is_blank(line)) {
      flush();
      continue;
    }
    if (!open) {
      current.assign(line);
      open = true;
    } else {
      current.erase(current.find_last_not_of(" \t\f\v") + 1);
      auto start = line.find_first_not_of(" \t\f\v");
      current += ' ';
      current.append(line.substr(start));
    }
  }
  flush();

  std::string out;
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    if (i) out += "\n\n";
    out += paragraphs[i];
  }
  return out;
}

}  // namespace detail

/// Strips boilerplate lines, joins the lines of each paragraph with single
/// spaces (blank lines separate paragraphs) and applies the length filter.
/// Length is counted in Unicode code points.
class Cleaner {
 public:
  explicit Cleaner(CleaningRules rules)
      : rules_(std::move(rules)), patterns_(detail::compile(rules_.boilerplate_patterns)) {}

  CleanResult operator()(const RawArticle& raw) const {
    if (text::utf8_length(raw.body) == std::string_view::npos) {
      throw Error(ErrorCode::MalformedInput, "story " + raw.story_id + ": body is not valid UTF-8");
    }
    std::string body = detail::clean_body(raw.body, patterns_);
    if (body.empty()) return RejectReason::EmptyAfterClean;
    std::size_t len = text::utf8_length(body);
    if (len < rules_.min_length) return RejectReason::TooShort;
    if (len > rules_.max_length) return RejectReason::TooLong;
    return CleanArticle{raw.story_id, raw.publish_time, Date{}, raw.language, raw.ticker,
                        std::move(body)};
  }

 private:
  CleaningRules rules_;
  std::vector<std::regex> patterns_;
};

inline CleanResult clean_article(const RawArticle& raw, const CleaningRules& rules) {
  return Cleaner(rules)(raw);
}

// ---------------------------------------------------------------------------
// Exchange calendar

struct ExchangeCalendar {
  std::string exchange;
  std::chrono::minutes market_open{9 * 60};  // local time of day
  std::chrono::minutes utc_offset{0};        // fixed offset of the exchange's local time
  std::chrono::minutes cutoff_offset{30};
  std::vector<Date> trading_days;  // strictly increasing

  /// Instant at which the news window for `day` closes (open - cutoff).
  Instant cutoff_instant(Date day) const {
    using namespace std::chrono;
    return time_point_cast<milliseconds>(sys_days{day} + market_open - cutoff_offset - utc_offset);
  }

  void validate() const {
    if (cutoff_offset <= std::chrono::minutes{0}) {
      throw Error(ErrorCode::ConfigError, "calendar.cutoff_minutes must be > 0");
    }
    if (trading_days.size() < 2) {
      throw Error(ErrorCode::ConfigError, "calendar needs at least two trading days");
    }
    for (std::size_t i = 1; i < trading_days.size(); ++i) {
      if (!(std::chrono::sys_days{trading_days[i - 1]} < std::chrono::sys_days{trading_days[i]})) {
        throw Error(ErrorCode::ConfigError, "calendar trading days must be strictly increasing");
      }
    }
  }
};

inline std::chrono::minutes parse_clock(const std::string& s, bool signed_offset) {
  static const std::regex re(R"(([+-])?(\d{2}):(\d{2}))");
  std::smatch m;
  if (!std::regex_match(s, m, re) || (m[1].matched && !signed_offset)) {
    throw Error(ErrorCode::ConfigError, "expected HH:MM, got '" + s + "'");
  }
  std::chrono::minutes v{std::stoi(m[2]) * 60 + std::stoi(m[3])};
  return m[1].matched && m[1] == "-" ? -v : v;
}

/// Calendar config: `{exchange, utc_offset: "+09:00", market_open: "09:00",
/// cutoff_minutes: 30, trading_days: [...]}` or, instead of the explicit
/// list, `start`/`end` with optional `holidays` (weekdays minus holidays).
inline ExchangeCalendar calendar_from_json(const nlohmann::json& j) {
  ExchangeCalendar cal;
  cal.exchange = j.value("exchange", std::string{});
  cal.market_open = parse_clock(j.value("market_open", std::string{"09:00"}), false);
  cal.utc_offset = parse_clock(j.value("utc_offset", std::string{"+00:00"}), true);
  cal.cutoff_offset = std::chrono::minutes{j.value("cutoff_minutes", 30)};
  if (j.contains("trading_days")) {
    for (const auto& d : j.at("trading_days")) cal.trading_days.push_back(parse_date(d.get<std::string>()));
  } else if (j.contains("start") && j.contains("end")) {
    std::set<std::chrono::sys_days> holidays;
    for (const auto& d : j.value("holidays", nlohmann::json::array())) {
      holidays.insert(std::chrono::sys_days{parse_date(d.get<std::string>())});
    }
    std::chrono::sys_days first{parse_date(j.at("start").get<std::string>())};
    std::chrono::sys_days last{parse_date(j.at("end").get<std::string>())};
    for (auto d = first; d <= last; d += std::chrono::days{1}) {
      std::chrono::weekday wd{d};
      if (wd == std::chrono::Saturday || wd == std::chrono::Sunday) continue;
      if (holidays.count(d)) continue;
      cal.trading_days.emplace_back(d);
    }
  } else {
    throw Error(ErrorCode::ConfigError, "calendar needs trading_days or start/end");
  }
  cal.validate();
  return cal;
}

inline nlohmann::json calendar_to_json(const ExchangeCalendar& cal) {
  auto clock = [](std::chrono::minutes m, bool sign) {
    char buf[32];
    long v = m.count();
    char s = v < 0 ? '-' : '+';
    v = v < 0 ? -v : v;
    if (sign) {
      std::snprintf(buf, sizeof buf, "%c%02ld:%02ld", s, v / 60, v % 60);
    } else {
      std::snprintf(buf, sizeof buf, "%02ld:%02ld", v / 60, v % 60);
    }
    return std::string(buf);
  };
  nlohmann::json days = nlohmann::json::array();
  for (auto d : cal.trading_days) days.push_back(format_date(d));
  return {{"exchange", cal.exchange},
          {"market_open", clock(cal.market_open, false)},
          {"utc_offset", clock(cal.utc_offset, true)},
          {"cutoff_minutes", cal.cutoff_offset.count()},
          {"trading_days", days}};
}

/// Returns the trading day t with publish_time in
/// [open(t-1) - cutoff, open(t) - cutoff). Non-trading days roll forward
/// because their timestamps fall into the next trading day's window.
inline Date assign_trading_day(const Timestamp& publish_time, const ExchangeCalendar& cal) {
  const auto& days = cal.trading_days;
  auto it = std::upper_bound(days.begin(), days.end(), publish_time.utc,
                             [&](Instant t, Date d) { return t < cal.cutoff_instant(d); });
  if (it == days.end()) {
    throw Error(ErrorCode::CalendarGap,
                format_timestamp(publish_time) + " is after the last calendar window");
  }
  if (it == days.begin()) {
    throw Error(ErrorCode::CalendarGap,
                format_timestamp(publish_time) + " is before the first calendar window");
  }
  return *it;
}

// ---------------------------------------------------------------------------
// Dedup, filtering and stock-day concatenation

struct BundleOptions {
  int min_ticker_score = 75;
  std::chrono::hours update_window{24};
  std::string english_language = "en";
  std::string foreign_language = "ja";
  CleaningRules rules;
  std::string paragraph_separator = "\n\n";
};

struct BundleStats {
  std::size_t input_records = 0;
  std::size_t superseded_or_late = 0;
  std::size_t low_score = 0;
  std::size_t multi_ticker = 0;
  std::size_t other_language = 0;
  std::size_t rejected_short = 0;
  std::size_t rejected_long = 0;
  std::size_t rejected_empty = 0;
  std::size_t calendar_gap = 0;
  std::size_t one_sided_groups = 0;
};

/// Per story keeps the last version published within `update_window` of its
/// first appearance, drops stories tied to more than one qualifying ticker,
/// cleans, assigns trading days and concatenates per (ticker, day, language).
/// Only (ticker, day) groups with both languages are emitted, sorted by
/// ticker then day.
inline std::vector<StockDayBundle> bundle_stock_days(const std::vector<RawArticle>& articles,
                                                     const ExchangeCalendar& cal,
                                                     const BundleOptions& opts = {},
                                                     BundleStats* stats = nullptr) {
  BundleStats local;
  BundleStats& st = stats ? *stats : local;
  st = BundleStats{};
  st.input_records = articles.size();

  // Exact duplicates of (story, time, ticker) collapse into one record.
  std::map<std::string, std::map<Instant, std::map<std::string, const RawArticle*>>> stories;
  for (const auto& a : articles) {
    stories[a.story_id][a.publish_time.utc].emplace(a.ticker, &a);
  }

  const Cleaner clean(opts.rules);

  struct Entry {
    Instant time;
    std::string story_id;
    std::string body;
  };
  // (ticker, day) -> per-language entries
  std::map<std::pair<std::string, std::chrono::sys_days>, std::array<std::vector<Entry>, 2>> groups;

  for (const auto& [story_id, versions] : stories) {
    const Instant first_seen = versions.begin()->first;
    const Instant limit = first_seen + opts.update_window;
    auto chosen = versions.upper_bound(limit);
    for (auto it = chosen; it != versions.end(); ++it) st.superseded_or_late += it->second.size();
    --chosen;  // last version at or before the limit; first_seen always qualifies
    for (auto it = versions.begin(); it != chosen; ++it) st.superseded_or_late += it->second.size();

    const RawArticle* pick = nullptr;
    int qualifying = 0;
    for (const auto& [ticker, rec] : chosen->second) {
      if (rec->ticker_score < 0 || rec->ticker_score > 100) {
        throw Error(ErrorCode::MalformedInput, "story " + story_id + ": ticker_score out of [0,100]");
      }
      if (rec->ticker_score >= opts.min_ticker_score) {
        ++qualifying;
        pick = rec;
      } else {
        ++st.low_score;
      }
    }
    if (qualifying == 0) continue;
    if (qualifying > 1) {
      st.multi_ticker += static_cast<std::size_t>(qualifying);
      continue;
    }

    std::size_t lang;
    if (pick->language == opts.english_language) {
      lang = index_of(Language::E);
    } else if (opts.foreign_language.empty() || pick->language == opts.foreign_language) {
      lang = index_of(Language::F);
    } else {
      ++st.other_language;
      continue;
    }

    auto cleaned = clean(*pick);
    if (auto* reason = std::get_if<RejectReason>(&cleaned)) {
      switch (*reason) {
        case RejectReason::EmptyAfterClean: ++st.rejected_empty; break;
        case RejectReason::TooShort: ++st.rejected_short; break;
        case RejectReason::TooLong: ++st.rejected_long; break;
      }
      continue;
    }
    std::string body = std::move(std::get<CleanArticle>(cleaned).body);

    Date day;
    try {
      day = assign_trading_day(pick->publish_time, cal);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CalendarGap) throw;
      ++st.calendar_gap;
      continue;
    }
    groups[{pick->ticker, std::chrono::sys_days{day}}][lang].push_back(
        Entry{pick->publish_time.utc, story_id, std::move(body)});
  }

  std::vector<StockDayBundle> out;
  for (auto& [key, sides] : groups) {
    if (sides[0].empty() || sides[1].empty()) {
      ++st.one_sided_groups;
      continue;
    }
    StockDayBundle b;
    b.ticker = key.first;
    b.trading_day = Date{key.second};
    for (std::size_t lang = 0; lang < 2; ++lang) {
      auto& entries = sides[lang];
      std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
        return std::tie(x.time, x.story_id) < std::tie(y.time, y.story_id);
      });
      std::string& dst = lang == 0 ? b.english_text : b.foreign_text;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i) dst += opts.paragraph_separator;
        dst += entries[i].body;
        b.source_story_ids.push_back(entries[i].story_id);
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL

inline RawArticle raw_article_from_json(const nlohmann::json& j) {
  RawArticle a;
  a.story_id = j.at("story_id").get<std::string>();
  a.publish_time = parse_timestamp(j.at("publish_time").get<std::string>());
  a.language = j.at("language").get<std::string>();
  a.ticker = j.at("ticker").get<std::string>();
  a.ticker_score = j.at("ticker_score").get<int>();
  a.body = j.at("body").get<std::string>();
  return a;
}

inline nlohmann::json to_json(const RawArticle& a) {
  return {{"story_id", a.story_id},        {"publish_time", format_timestamp(a.publish_time)},
          {"language", a.language},        {"ticker", a.ticker},
          {"ticker_score", a.ticker_score}, {"body", a.body}};
}

inline nlohmann::json to_json(const StockDayBundle& b) {
  return {{"ticker", b.ticker},
          {"trading_day", format_date(b.trading_day)},
          {"english_text", b.english_text},
          {"foreign_text", b.foreign_text},
          {"source_story_ids", b.source_story_ids}};
}

inline StockDayBundle bundle_from_json(const nlohmann::json& j) {
  return StockDayBundle{j.at("ticker").get<std::string>(),
                        parse_date(j.at("trading_day").get<std::string>()),
                        j.at("english_text").get<std::string>(),
                        j.at("foreign_text").get<std::string>(),
                        j.at("source_story_ids").get<std::vector<std::string>>()};
}

inline std::vector<RawArticle> read_raw_articles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StageDependencyError, "cannot open articles file " + path);
  std::vector<RawArticle> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    try {
      out.push_back(raw_article_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedInput, path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_bundles(const std::string& path, const std::vector<StockDayBundle>& bundles) {
  std::ofstream out(path, std::ios::binary);
  for (const auto& b : bundles) out << to_json(b).dump() << '\n';
}

inline std::vector<StockDayBundle> read_bundles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StageDependencyError, "cannot open bundle file " + path);
  std::vector<StockDayBundle> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!text::is_blank(line)) out.push_back(bundle_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace otalign::corpus
