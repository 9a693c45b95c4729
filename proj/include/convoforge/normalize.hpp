#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace convoforge {

namespace detail {

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one code point starting at `i`; advances `i`. Invalid sequences
// yield the raw byte value so nothing is silently dropped.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      i += 2;
      return (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      i += 3;
      return (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      i += 4;
      return (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) | (char32_t(c2) << 6) |
             char32_t(c3);
    }
  }
  ++i;
  return b0;
}

// Simple case folding for the Latin, Greek and Cyrillic blocks.
inline void append_folded(std::string& out, char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') {
    cp += 0x20;
  } else if (cp == 0xDF) {
    out += "ss";
    return;
  } else if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) {
    cp += 0x20;
  } else if (cp >= 0x100 && cp <= 0x17F) {
    const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
    if (cp == 0x130) {
      out += "i\xCC\x87";
      return;
    }
    if (cp == 0x178) {
      append_utf8(out, 0xFF);
      return;
    }
    if (cp == 0x149) {
      out += "\xCA\xBCn";
      return;
    }
    if (cp == 0x17F) {
      out += 's';
      return;
    }
    if (odd_upper) {
      if (cp % 2 == 1) ++cp;
    } else if (cp != 0x138 && cp % 2 == 0) {
      ++cp;
    }
  } else if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) {
    cp += 0x20;
  } else if (cp == 0x3C2) {
    cp = 0x3C3;
  } else if (cp >= 0x410 && cp <= 0x42F) {
    cp += 0x20;
  } else if (cp >= 0x400 && cp <= 0x40F) {
    cp += 0x50;
  }
  append_utf8(out, cp);
}

constexpr bool is_stripped(char32_t cp) {
  switch (cp) {
    case '.': case ',': case ';': case ':': case '!': case '?': case '\'': case '"':
      return true;
    default:
      return false;
  }
}

constexpr bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
         cp == 0xA0;
}

}  // namespace detail

/// Case-folds, strips `.,;:!?'"` and collapses whitespace runs to one space.
inline std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size();) {
    const char32_t cp = detail::next_code_point(text, i);
    if (detail::is_stripped(cp)) continue;
    if (detail::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    detail::append_folded(out, cp);
  }
  return out;
}

/// Normalized word tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  const std::string norm = normalize(text);
  std::size_t start = 0;
  while (start < norm.size()) {
    std::size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    tokens.emplace_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

inline std::string join(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

/// Number of whitespace-separated words; drives speech-duration accounting.
inline std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace convoforge
