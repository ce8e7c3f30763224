#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace otalign::text {

/// Number of Unicode code points, or npos when `s` is not valid UTF-8.
inline std::size_t utf8_length(std::string_view s) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    char32_t cp;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c >> 5) == 0x6) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c >> 4) == 0xE) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c >> 3) == 0x1E) {
      len = 4;
      cp = c & 0x07;
    } else {
      return std::string_view::npos;
    }
    if (i + len > s.size()) return std::string_view::npos;
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) return std::string_view::npos;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return std::string_view::npos;
    }
    i += len;
    ++count;
  }
  return count;
}

inline bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\f\v\r") == std::string_view::npos;
}

inline std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\f\v\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\f\v\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find('\n', start);
    if (pos == std::string_view::npos) {
      lines.push_back(s.substr(start));
      break;
    }
    lines.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

}  // namespace otalign::text
