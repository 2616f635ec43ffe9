#pragma once

// Encoded summarization: score-weighted document vectors, query-candidate
// relevance vectors, and extractive summaries built from phrase scores.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lcr/corpus.hpp"
#include "lcr/error.hpp"
#include "lcr/lexmatch.hpp"
#include "lcr/phrase_scorer.hpp"

namespace lcr {

/// g(d) = sum_j P_j [f_d; f_s(j); f_p(j)] / sum_j P_j, length 3c.
template <typename T>
std::vector<double> compose_doc_vector(const ScoredDocument<T>& scored) {
  if (scored.phrase_count() == 0) throw Error(ErrorCode::EmptyDocument, "document has no scored phrases");
  const std::size_t c = scored.document_feature.size();
  std::vector<double> g(3 * c, 0.0), lo(3 * c, HUGE_VAL), hi(3 * c, -HUGE_VAL);
  double total = 0.0;
  auto add = [&](std::size_t i, double p, double x) {
    g[i] += p * x;
    lo[i] = std::min(lo[i], x);
    hi[i] = std::max(hi[i], x);
  };
  for (const auto& s : scored.sentences) {
    for (std::size_t j = 0; j < s.scores.size(); ++j) {
      const double p = static_cast<double>(s.scores[j]);
      total += p;
      for (std::size_t k = 0; k < c; ++k) {
        add(k, p, static_cast<double>(scored.document_feature[k]));
        add(c + k, p, static_cast<double>(s.sentence_feature[k]));
        add(2 * c + k, p, static_cast<double>(s.phrase_features[j][k]));
      }
    }
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyDocument, "phrase scores sum to zero");
  // Clamping removes rounding drift so g stays inside the inputs' range.
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::clamp(g[i] / total, lo[i], hi[i]);
  return g;
}

/// h(q, c) = g(q) (.) g(c).
inline std::vector<double> relevance_vector(const std::vector<double>& g_query, const std::vector<double>& g_candidate) {
  if (g_query.size() != g_candidate.size())
    throw Error(ErrorCode::LengthMismatch, "document vectors of length " + std::to_string(g_query.size()) + " and " +
                                               std::to_string(g_candidate.size()));
  std::vector<double> h(g_query.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = g_query[i] * g_candidate[i];
  return h;
}

// ---------------------------------------------------------------------------

struct SummaryPhrase {
  std::size_t sentence = 0;  // index into the document's body sentences
  std::size_t start = 0;     // first token within that sentence
  std::vector<std::string> tokens;

  friend bool operator==(const SummaryPhrase&, const SummaryPhrase&) = default;
};

struct GeneratedSummary {
  std::vector<SummaryPhrase> phrases;  // document order
  std::size_t total_tokens = 0;

  friend bool operator==(const GeneratedSummary&, const GeneratedSummary&) = default;
};

inline constexpr double kDefaultSummaryThreshold = 0.20;

/// Picks phrase windows by descending score (ties: earlier position first),
/// marking their tokens as selected, and stops right after the number of
/// selected tokens first exceeds t * (document tokens). Overlapping or
/// adjacent windows in one sentence come out as a single merged phrase.
template <typename T>
GeneratedSummary generate_summary(const ScoredDocument<T>& scored, const std::vector<Sentence>& body,
                                  double threshold = kDefaultSummaryThreshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "summary threshold must be in (0, 1]");
  if (scored.sentences.size() != body.size())
    throw Error(ErrorCode::LengthMismatch, "scored document and body disagree on sentence count");

  const std::vector<T> scores = scored.all_scores();
  const std::vector<PhraseWindow> windows = scored.windows();
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<std::vector<char>> selected(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) selected[i].assign(body[i].size(), 0);

  const double budget = threshold * static_cast<double>(scored.token_count());
  std::size_t total = 0;
  for (std::size_t idx : order) {
    const PhraseWindow& w = windows[idx];
    for (std::size_t t = w.start; t < w.start + w.length; ++t) {
      if (!selected[w.sentence][t]) {
        selected[w.sentence][t] = 1;
        ++total;
      }
    }
    if (static_cast<double>(total) > budget) break;
  }

  GeneratedSummary out;
  out.total_tokens = total;
  for (std::size_t i = 0; i < body.size(); ++i) {
    std::size_t t = 0;
    while (t < selected[i].size()) {
      if (!selected[i][t]) {
        ++t;
        continue;
      }
      SummaryPhrase p;
      p.sentence = i;
      p.start = t;
      while (t < selected[i].size() && selected[i][t]) p.tokens.push_back(body[i].tokens[t++].surface);
      out.phrases.push_back(std::move(p));
    }
  }
  return out;
}

/// Lexical view of a generated summary: each phrase is one unit sentence.
inline TextUnit summary_text_unit(const GeneratedSummary& summary) {
  std::vector<Sentence> sentences;
  for (const auto& p : summary.phrases) {
    Sentence s;
    for (const auto& t : p.tokens) s.tokens.push_back(make_token(t));
    sentences.push_back(std::move(s));
  }
  return to_text_unit(sentences);
}

/// Dump format: one phrase per line, `<sentence index>\t<space-joined tokens>`.
inline std::string format_summary(const GeneratedSummary& summary) {
  std::string out;
  for (const auto& p : summary.phrases) {
    out += std::to_string(p.sentence);
    out += '\t';
    for (std::size_t i = 0; i < p.tokens.size(); ++i) {
      if (i) out += ' ';
      out += p.tokens[i];
    }
    out += '\n';
  }
  return out;
}

/// Inverse of format_summary. Phrase start offsets are not part of the dump
/// and come back as 0.
inline GeneratedSummary parse_summary(const std::string& text, const std::string& origin = "<summary>") {
  GeneratedSummary out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error(ErrorCode::MalformedLine, origin + ":" + std::to_string(line_no) + ": expected <index>\\t<tokens>");
    SummaryPhrase p;
    try {
      p.sentence = std::stoul(line.substr(0, tab));
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedLine, origin + ":" + std::to_string(line_no) + ": bad sentence index");
    }
    std::istringstream toks(line.substr(tab + 1));
    std::string tok;
    while (toks >> tok) p.tokens.push_back(tok);
    out.total_tokens += p.tokens.size();
    out.phrases.push_back(std::move(p));
  }
  return out;
}

}  // namespace lcr
