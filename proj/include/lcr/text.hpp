#pragma once

// Rule-based tokenizer and token normalization.
//
// Tokenizer rules (version 1):
//   W1. Word characters are ASCII letters, ASCII digits and every byte >= 0x80
//       (so UTF-8 sequences stay inside words).
//   W2. A token is a maximal run of word characters. A single '\'', '-' or '.'
//       flanked on both sides by word characters is kept inside the token
//       ("don't", "well-known", "U.S", "3.5").
//   W3. Every other character separates tokens and is discarded.
//   S1. A sentence ends at '.', '!' or '?' when the next character is
//       whitespace, a closing quote/bracket or end of input.
//   S2. A '.' does not end a sentence when the token before it is in the
//       abbreviation table, contains an internal '.', or is a single
//       uppercase letter (an initial).
//   S3. Sentences without any token are dropped.

#include <algorithm>
#include <iterator>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "lcr/porter.hpp"

namespace lcr {

inline constexpr int kTokenizerRulesVersion = 1;

struct Token {
  std::string surface;
  std::string normalized;
  bool is_stopword = false;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

// English stopword list (lowercase).
inline constexpr std::string_view kStopwords[] = {
    "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an", "and", "any",
    "are", "aren", "aren't", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "couldn", "couldn't", "d", "did", "didn", "didn't",
    "do", "does", "doesn", "doesn't", "doing", "don", "don't", "down", "during", "each", "few",
    "for", "from", "further", "had", "hadn", "hadn't", "has", "hasn", "hasn't", "have", "haven",
    "haven't", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "isn", "isn't", "it", "it's", "its", "itself", "just", "ll",
    "m", "ma", "me", "mightn", "mightn't", "more", "most", "mustn", "mustn't", "my", "myself",
    "needn", "needn't", "no", "nor", "not", "now", "o", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "ourselves", "out", "over", "own", "re", "s", "same", "shan",
    "shan't", "she", "she's", "should", "should've", "shouldn", "shouldn't", "so", "some",
    "such", "t", "than", "that", "that'll", "the", "their", "theirs", "them", "themselves",
    "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until",
    "up", "upon", "ve", "very", "was", "wasn", "wasn't", "we", "were", "weren", "weren't", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "won", "won't",
    "wouldn", "wouldn't", "y", "you", "you'd", "you'll", "you're", "you've", "your", "yours",
    "yourself", "yourselves",
};

// Lowercase tokens (without their trailing period) that never end a sentence.
inline constexpr std::string_view kAbbreviations[] = {
    "mr", "mrs", "ms", "dr", "prof", "st", "sr", "jr", "no", "nos", "v", "vs", "co", "ltd",
    "inc", "corp", "fig", "art", "arts", "s", "ss", "para", "paras", "p", "pp", "cf", "etc",
    "e.g", "i.e", "u.s", "u.k", "ch", "sec", "secs", "r.s.c", "c", "j", "jj", "ca", "al",
};

inline bool is_stopword(std::string_view lowercase_word) {
  return std::binary_search(std::begin(kStopwords), std::end(kStopwords), lowercase_word);
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

inline Token make_token(std::string surface) {
  Token t;
  t.normalized = to_lower(surface);
  t.is_stopword = is_stopword(t.normalized);
  t.surface = std::move(surface);
  return t;
}

namespace detail {

inline bool is_word_char(char ch) {
  auto u = static_cast<unsigned char>(ch);
  return u >= 0x80 || std::isalnum(u) != 0;
}

inline bool is_joiner(char ch) { return ch == '\'' || ch == '-' || ch == '.'; }

inline bool is_closer(char ch) {
  return ch == '"' || ch == '\'' || ch == ')' || ch == ']' || ch == '}';
}

inline bool is_abbreviation(std::string_view surface) {
  if (surface.size() == 1 && std::isupper(static_cast<unsigned char>(surface[0]))) return true;
  if (surface.find('.') != std::string_view::npos) return true;
  std::string lower = to_lower(surface);
  return std::find(std::begin(kAbbreviations), std::end(kAbbreviations), lower) != std::end(kAbbreviations);
}

}  // namespace detail

/// Splits text into sentences of tokens following rules W1-W3 and S1-S3.
inline std::vector<Sentence> tokenize(std::string_view text) {
  std::vector<Sentence> sentences;
  Sentence current;
  auto flush = [&] {
    if (!current.tokens.empty()) sentences.push_back(std::move(current));
    current = Sentence{};
  };

  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    char ch = text[i];
    if (detail::is_word_char(ch)) {
      std::size_t start = i;
      while (i < n) {
        if (detail::is_word_char(text[i])) {
          ++i;
        } else if (detail::is_joiner(text[i]) && i + 1 < n && detail::is_word_char(text[i + 1])) {
          i += 2;
        } else {
          break;
        }
      }
      current.tokens.push_back(make_token(std::string(text.substr(start, i - start))));
      continue;
    }
    if (ch == '.' || ch == '!' || ch == '?') {
      std::size_t next = i + 1;
      while (next < n && (text[next] == '.' || text[next] == '!' || text[next] == '?')) ++next;
      bool boundary = next >= n || std::isspace(static_cast<unsigned char>(text[next])) ||
                      detail::is_closer(text[next]);
      if (boundary && ch == '.' && next == i + 1 && !current.tokens.empty() &&
          detail::is_abbreviation(current.tokens.back().surface)) {
        boundary = false;
      }
      if (boundary) flush();
      i = next;
      continue;
    }
    ++i;
  }
  flush();
  return sentences;
}

/// Lowercases, optionally Porter-stems and optionally drops stopwords. The
/// stopword decision is made on the lowercased surface before stemming.
inline std::vector<Token> normalize(const std::vector<Token>& tokens, bool stem, bool drop_stopwords) {
  std::vector<Token> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) {
    std::string lower = to_lower(t.surface);
    bool stop = is_stopword(lower);
    if (drop_stopwords && stop) continue;
    Token n;
    n.surface = t.surface;
    n.normalized = stem ? porter::stem(lower) : lower;
    n.is_stopword = stop;
    out.push_back(std::move(n));
  }
  return out;
}

}  // namespace lcr
