#pragma once

// Lexical overlap features between a query and a candidate case.
//
// Six formulas (unigram, bigram, skip-bigram, unigram+skip-bigram, LCS,
// weighted LCS), each reported as recall (normalized by the query),
// precision (normalized by the candidate) and F-measure, computed over six
// matching options (query summary/paragraphs against candidate generated
// summary/lead sentences/paragraphs): 6 x 6 x 3 = 108 dimensions.
//
// Counting semantics follow ROUGE: n-grams and skip-bigrams are matched as
// clipped multisets and never span a sentence boundary; LCS is the union LCS
// of each query sentence against every candidate sentence, with hits clipped
// by token counts on both sides.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lcr/corpus.hpp"
#include "lcr/error.hpp"
#include "lcr/text.hpp"

namespace lcr {

/// A document part as normalized token sequences, one per sentence.
struct TextUnit {
  std::vector<std::vector<std::string>> sentences;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }
  bool empty() const { return token_count() == 0; }
  friend bool operator==(const TextUnit&, const TextUnit&) = default;
};

inline TextUnit to_text_unit(const std::vector<Sentence>& sentences, bool stem = true, bool drop_stopwords = true) {
  TextUnit unit;
  for (const auto& s : sentences) {
    std::vector<std::string> toks;
    for (auto& t : normalize(s.tokens, stem, drop_stopwords)) toks.push_back(std::move(t.normalized));
    if (!toks.empty()) unit.sentences.push_back(std::move(toks));
  }
  return unit;
}

struct MatchScores {
  double recall = 0.0;
  double precision = 0.0;
  double f_measure = 0.0;

  friend bool operator==(const MatchScores&, const MatchScores&) = default;
};

inline double f_measure(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// Scores from a hit count and the two normalizers. The F-measure is taken
/// in closed form, 2*hits/(nq+nc), which equals the harmonic mean of the two
/// ratios.
inline MatchScores count_scores(double hits, double query_total, double candidate_total) {
  if (hits <= 0.0 || query_total <= 0.0 || candidate_total <= 0.0) return {};
  return {hits / query_total, hits / candidate_total, 2.0 * hits / (query_total + candidate_total)};
}

namespace detail {

using GramCounts = std::map<std::vector<std::string>, std::size_t>;

inline GramCounts ngram_counts(const TextUnit& u, int n, std::size_t& total) {
  GramCounts counts;
  total = 0;
  const auto len = static_cast<std::size_t>(n);
  for (const auto& s : u.sentences) {
    if (s.size() < len) continue;
    for (std::size_t i = 0; i + len <= s.size(); ++i) {
      ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                        s.begin() + static_cast<std::ptrdiff_t>(i + len))];
      ++total;
    }
  }
  return counts;
}

inline GramCounts skip_bigram_counts(const TextUnit& u, std::size_t& total) {
  GramCounts counts;
  total = 0;
  for (const auto& s : u.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        ++counts[{s[i], s[j]}];
        ++total;
      }
  }
  return counts;
}

inline std::size_t clipped_overlap(const GramCounts& a, const GramCounts& b) {
  std::size_t hits = 0;
  for (const auto& [gram, count] : a)
    if (auto it = b.find(gram); it != b.end()) hits += std::min(count, it->second);
  return hits;
}

}  // namespace detail

inline MatchScores ngram_scores(const TextUnit& q, const TextUnit& c, int n) {
  if (n != 1 && n != 2) throw Error(ErrorCode::InvalidConfig, "n-gram order must be 1 or 2");
  std::size_t nq = 0, nc = 0;
  auto cq = detail::ngram_counts(q, n, nq);
  auto cc = detail::ngram_counts(c, n, nc);
  return count_scores(static_cast<double>(detail::clipped_overlap(cq, cc)), static_cast<double>(nq),
                      static_cast<double>(nc));
}

inline MatchScores skip_bigram_scores(const TextUnit& q, const TextUnit& c) {
  std::size_t nq = 0, nc = 0;
  auto cq = detail::skip_bigram_counts(q, nq);
  auto cc = detail::skip_bigram_counts(c, nc);
  return count_scores(static_cast<double>(detail::clipped_overlap(cq, cc)), static_cast<double>(nq),
                      static_cast<double>(nc));
}

/// Unigram and skip-bigram hits and totals summed before normalizing.
inline MatchScores unigram_skip_scores(const TextUnit& q, const TextUnit& c) {
  std::size_t uq = 0, uc = 0, sq = 0, sc = 0;
  auto ucq = detail::ngram_counts(q, 1, uq);
  auto ucc = detail::ngram_counts(c, 1, uc);
  auto scq = detail::skip_bigram_counts(q, sq);
  auto scc = detail::skip_bigram_counts(c, sc);
  std::size_t hits = detail::clipped_overlap(ucq, ucc) + detail::clipped_overlap(scq, scc);
  return count_scores(static_cast<double>(hits), static_cast<double>(uq + sq), static_cast<double>(uc + sc));
}

namespace detail {

// Positions of `a` on one canonical LCS of a and b.
inline std::vector<std::size_t> lcs_positions(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::uint32_t>> len(n + 1, std::vector<std::uint32_t>(m + 1, 0));
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      len[i][j] = a[i - 1] == b[j - 1] ? len[i - 1][j - 1] + 1 : std::max(len[i - 1][j], len[i][j - 1]);
  std::vector<std::size_t> pos;
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    if (a[i - 1] == b[j - 1]) {
      pos.push_back(i - 1);
      --i;
      --j;
    } else if (len[i - 1][j] >= len[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(pos.begin(), pos.end());
  return pos;
}

}  // namespace detail

/// Union-LCS: for each query sentence, the union of its tokens lying on an
/// LCS with any candidate sentence; hits are clipped by remaining token
/// counts on both sides so the total never exceeds either length.
inline MatchScores lcs_scores(const TextUnit& q, const TextUnit& c) {
  const std::size_t nq = q.token_count(), nc = c.token_count();
  if (nq == 0 || nc == 0) return {};
  std::unordered_map<std::string, std::size_t> q_left, c_left;
  for (const auto& s : q.sentences)
    for (const auto& w : s) ++q_left[w];
  for (const auto& s : c.sentences)
    for (const auto& w : s) ++c_left[w];

  std::size_t hits = 0;
  for (const auto& qs : q.sentences) {
    std::vector<char> on_lcs(qs.size(), 0);
    for (const auto& cs : c.sentences)
      for (std::size_t p : detail::lcs_positions(qs, cs)) on_lcs[p] = 1;
    for (std::size_t p = 0; p < qs.size(); ++p) {
      if (!on_lcs[p]) continue;
      auto& ql = q_left[qs[p]];
      auto it = c_left.find(qs[p]);
      if (ql > 0 && it != c_left.end() && it->second > 0) {
        --ql;
        --it->second;
        ++hits;
      }
    }
  }
  return count_scores(static_cast<double>(hits), static_cast<double>(nq), static_cast<double>(nc));
}

inline constexpr double kDefaultWlcsExponent = 1.2;

/// Maximum over all common subsequences of sum(f(run)) with f(k) = k^exponent,
/// where a run is a block of matches consecutive in both sequences and inside
/// one sentence on each side. Exact for exponent >= 1 (f superadditive).
inline double weighted_lcs(const TextUnit& q, const TextUnit& c, double exponent) {
  std::vector<const std::string*> x, y;
  std::vector<std::size_t> sx, sy;
  std::size_t longest_q = 0, longest_c = 0;
  for (std::size_t s = 0; s < q.sentences.size(); ++s) {
    longest_q = std::max(longest_q, q.sentences[s].size());
    for (const auto& w : q.sentences[s]) {
      x.push_back(&w);
      sx.push_back(s);
    }
  }
  for (std::size_t s = 0; s < c.sentences.size(); ++s) {
    longest_c = std::max(longest_c, c.sentences[s].size());
    for (const auto& w : c.sentences[s]) {
      y.push_back(&w);
      sy.push_back(s);
    }
  }
  const std::size_t n = x.size(), m = y.size();
  if (n == 0 || m == 0) return 0.0;

  const std::size_t max_run = std::min(longest_q, longest_c);
  std::vector<double> f(max_run + 1);
  for (std::size_t k = 0; k <= max_run; ++k) f[k] = std::pow(static_cast<double>(k), exponent);

  // best[i][j] over prefixes x[:i], y[:j]; only the last max_run+1 rows are live.
  const std::size_t rows = max_run + 1;
  std::vector<std::vector<double>> best(rows, std::vector<double>(m + 1, 0.0));
  std::vector<std::uint32_t> run_prev(m + 1, 0), run_cur(m + 1, 0);
  auto row = [&](std::size_t i) -> std::vector<double>& { return best[i % rows]; };

  for (std::size_t i = 1; i <= n; ++i) {
    auto& cur = row(i);
    const auto& up = row(i - 1);
    cur[0] = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      std::uint32_t run = 0;
      if (*x[i - 1] == *y[j - 1]) {
        run = 1;
        if (i >= 2 && j >= 2 && sx[i - 1] == sx[i - 2] && sy[j - 1] == sy[j - 2]) run += run_prev[j - 1];
      }
      run_cur[j] = run;
      double v = std::max(up[j], cur[j - 1]);
      for (std::uint32_t k = 1; k <= run; ++k) v = std::max(v, row(i - k)[j - k] + f[k]);
      cur[j] = v;
    }
    std::swap(run_prev, run_cur);
  }
  return row(n)[m];
}

/// Weighted-LCS scores: recall = f^-1(W / F_q), precision = f^-1(W / F_c),
/// where F_u sums f(sentence length) over the sentences of u (for a single
/// sentence this is f(|u|)).
inline MatchScores wlcs_scores(const TextUnit& q, const TextUnit& c, double exponent = kDefaultWlcsExponent) {
  if (!(exponent >= 1.0)) throw Error(ErrorCode::InvalidExponent, "weight exponent must be >= 1, got " + std::to_string(exponent));
  if (q.empty() || c.empty()) return {};
  double w = weighted_lcs(q, c, exponent);
  if (w <= 0.0) return {};
  double fq = 0.0, fc = 0.0;
  for (const auto& s : q.sentences) fq += std::pow(static_cast<double>(s.size()), exponent);
  for (const auto& s : c.sentences) fc += std::pow(static_cast<double>(s.size()), exponent);
  double r = std::pow(w / fq, 1.0 / exponent);
  double p = std::pow(w / fc, 1.0 / exponent);
  r = std::min(r, 1.0);
  p = std::min(p, 1.0);
  return {r, p, f_measure(p, r)};
}

// ---------------------------------------------------------------------------

enum class Formula { Unigram, Bigram, SkipBigram, UnigramSkip, Lcs, WeightedLcs };
inline constexpr std::size_t kFormulaCount = 6;
inline constexpr std::size_t kFactorCount = 3;  // recall, precision, f
inline constexpr std::size_t kOptionWidth = kFormulaCount * kFactorCount;  // 18
inline constexpr std::size_t kOptionCount = 6;
inline constexpr std::size_t kLexicalDims = kOptionCount * kOptionWidth;  // 108

using OptionScores = std::array<double, kOptionWidth>;
using LexicalFeatureVector = std::array<double, kLexicalDims>;

inline MatchScores formula_scores(Formula f, const TextUnit& q, const TextUnit& c, double wlcs_exponent) {
  switch (f) {
    case Formula::Unigram: return ngram_scores(q, c, 1);
    case Formula::Bigram: return ngram_scores(q, c, 2);
    case Formula::SkipBigram: return skip_bigram_scores(q, c);
    case Formula::UnigramSkip: return unigram_skip_scores(q, c);
    case Formula::Lcs: return lcs_scores(q, c);
    case Formula::WeightedLcs: return wlcs_scores(q, c, wlcs_exponent);
  }
  return {};
}

/// The 6 formulas x 3 factors for one (query part, candidate part) pairing.
inline OptionScores match_option(const TextUnit& q_part, const TextUnit& c_part,
                                 double wlcs_exponent = kDefaultWlcsExponent) {
  OptionScores out{};
  for (std::size_t f = 0; f < kFormulaCount; ++f) {
    MatchScores s = formula_scores(static_cast<Formula>(f), q_part, c_part, wlcs_exponent);
    out[f * 3 + 0] = s.recall;
    out[f * 3 + 1] = s.precision;
    out[f * 3 + 2] = s.f_measure;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature subset codes: [ES | ES+<q>-<c> | <q>-<c>], q over {s,p}, c over
// {p,l,e}. "ES" switches on the relevance block.

enum class QueryPart { Summary, Paragraphs };
enum class CandidatePart { GeneratedSummary, LeadSentences, Paragraphs };

/// Option index for a pairing: options are ordered s-e, s-l, s-p, p-e, p-l, p-p.
constexpr std::size_t option_index(QueryPart q, CandidatePart c) {
  return static_cast<std::size_t>(q) * 3 + static_cast<std::size_t>(c);
}

/// Flat index into the 108-dim vector.
constexpr std::size_t lexical_index(std::size_t option, Formula formula, std::size_t factor) {
  return option * kOptionWidth + static_cast<std::size_t>(formula) * kFactorCount + factor;
}

struct FeatureSubset {
  bool relevance = false;
  bool query_summary = false;
  bool query_paragraphs = false;
  bool cand_paragraphs = false;
  bool cand_lead = false;
  bool cand_summary = false;

  bool has_lexical() const {
    return (query_summary || query_paragraphs) && (cand_paragraphs || cand_lead || cand_summary);
  }

  bool option_active(std::size_t option) const {
    bool q = option < 3 ? query_summary : query_paragraphs;
    switch (option % 3) {
      case 0: return q && cand_summary;
      case 1: return q && cand_lead;
      default: return q && cand_paragraphs;
    }
  }

  static FeatureSubset all() { return {true, true, true, true, true, true}; }

  static FeatureSubset parse(const std::string& code) {
    auto fail = [&](const std::string& why) { return Error(ErrorCode::InvalidSubsetCode, "'" + code + "': " + why); };
    FeatureSubset s;
    std::string rest = code;
    if (rest == "ES") {
      s.relevance = true;
      return s;
    }
    if (rest.rfind("ES+", 0) == 0) {
      s.relevance = true;
      rest = rest.substr(3);
    }
    auto dash = rest.find('-');
    if (dash == std::string::npos) throw fail("expected <query parts>-<candidate parts>");
    std::string q = rest.substr(0, dash), c = rest.substr(dash + 1);
    if (q.empty() || c.empty()) throw fail("empty part list");
    for (char ch : q) {
      bool* slot = ch == 's' ? &s.query_summary : ch == 'p' ? &s.query_paragraphs : nullptr;
      if (!slot) throw fail(std::string("unknown query part '") + ch + "'");
      if (*slot) throw fail(std::string("repeated query part '") + ch + "'");
      *slot = true;
    }
    for (char ch : c) {
      bool* slot = ch == 'p' ? &s.cand_paragraphs : ch == 'l' ? &s.cand_lead : ch == 'e' ? &s.cand_summary : nullptr;
      if (!slot) throw fail(std::string("unknown candidate part '") + ch + "'");
      if (*slot) throw fail(std::string("repeated candidate part '") + ch + "'");
      *slot = true;
    }
    return s;
  }

  std::string to_string() const {
    std::string lex;
    if (has_lexical()) {
      if (query_summary) lex += 's';
      if (query_paragraphs) lex += 'p';
      lex += '-';
      if (cand_paragraphs) lex += 'p';
      if (cand_lead) lex += 'l';
      if (cand_summary) lex += 'e';
    }
    if (relevance) return lex.empty() ? "ES" : "ES+" + lex;
    return lex;
  }

  friend bool operator==(const FeatureSubset&, const FeatureSubset&) = default;
};

/// Normalized views of a query used by the lexical options.
struct QueryParts {
  std::optional<TextUnit> summary;
  TextUnit paragraphs;

  static QueryParts from(const CaseDocument& doc) {
    QueryParts p;
    if (doc.summary) p.summary = to_text_unit(*doc.summary);
    p.paragraphs = to_text_unit(doc.body_sentences());
    return p;
  }
};

/// Normalized views of a candidate. The summary part is always the generated
/// summary.
struct CandidateParts {
  TextUnit generated_summary;
  TextUnit lead_sentences;
  TextUnit paragraphs;

  static CandidateParts from(const CaseDocument& doc, TextUnit generated_summary) {
    CandidateParts p;
    p.generated_summary = std::move(generated_summary);
    p.lead_sentences = to_text_unit(lcr::lead_sentences(doc));
    p.paragraphs = to_text_unit(doc.body_sentences());
    return p;
  }
};

/// Fixed-width 108-dim vector; options outside `subset` are zero-filled.
inline LexicalFeatureVector extract_lexical_features(const QueryParts& query, const CandidateParts& candidate,
                                                     const FeatureSubset& subset,
                                                     double wlcs_exponent = kDefaultWlcsExponent) {
  LexicalFeatureVector v{};
  if (subset.query_summary && subset.has_lexical() && !query.summary)
    throw Error(ErrorCode::MissingQuerySummary, "subset '" + subset.to_string() + "' needs a query summary");
  for (std::size_t option = 0; option < kOptionCount; ++option) {
    if (!subset.option_active(option)) continue;
    const TextUnit& q = option < 3 ? *query.summary : query.paragraphs;
    const TextUnit& c = option % 3 == 0 ? candidate.generated_summary
                        : option % 3 == 1 ? candidate.lead_sentences
                                          : candidate.paragraphs;
    OptionScores s = match_option(q, c, wlcs_exponent);
    std::copy(s.begin(), s.end(), v.begin() + static_cast<std::ptrdiff_t>(option * kOptionWidth));
  }
  return v;
}

inline LexicalFeatureVector extract_lexical_features(const CaseDocument& query, const CaseDocument& candidate,
                                                     const TextUnit& candidate_generated_summary,
                                                     const FeatureSubset& subset,
                                                     double wlcs_exponent = kDefaultWlcsExponent) {
  if (subset.query_summary && subset.has_lexical() && !query.summary)
    throw Error(ErrorCode::MissingQuerySummary, "query '" + query.id + "' has no summary");
  return extract_lexical_features(QueryParts::from(query), CandidateParts::from(candidate, candidate_generated_summary),
                                  subset, wlcs_exponent);
}

}  // namespace lcr
