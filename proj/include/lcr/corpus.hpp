#pragma once

// Case documents, the on-disk corpus layout and corpus statistics.
//
// Raw case file conventions:
//   - Paragraphs are separated by one or more blank lines.
//   - A line beginning with "Summary:" opens the expert summary. The summary
//     runs until the first "Present:" (inline or at a line start) or, when no
//     "Present:" follows, until the next blank line. Text after "Present:" up
//     to the end of its paragraph is metadata and is discarded, as is any
//     text before the "Summary:" line.
//   - The unedited marker suppresses the summary entirely.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lcr/error.hpp"
#include "lcr/text.hpp"

namespace lcr {

inline constexpr std::string_view kUneditedMarker = "This case is unedited, therefore contains no summary";
inline constexpr std::string_view kSummaryIndicator = "Summary:";
inline constexpr std::string_view kPresentIndicator = "Present:";

struct Paragraph {
  std::vector<Sentence> sentences;

  const Sentence& lead() const { return sentences.front(); }
  friend bool operator==(const Paragraph&, const Paragraph&) = default;
};

struct CaseDocument {
  std::string id;
  std::optional<std::vector<Sentence>> summary;
  std::vector<Paragraph> paragraphs;
  bool no_summary_marker_present = false;
  // "Present:" seen without a preceding "Summary:" line.
  bool orphan_present_indicator = false;

  bool has_summary() const { return summary.has_value(); }

  /// All body sentences in paragraph order.
  std::vector<Sentence> body_sentences() const {
    std::vector<Sentence> out;
    for (const auto& p : paragraphs) out.insert(out.end(), p.sentences.begin(), p.sentences.end());
    return out;
  }

  std::size_t body_token_count() const {
    std::size_t n = 0;
    for (const auto& p : paragraphs)
      for (const auto& s : p.sentences) n += s.size();
    return n;
  }

  friend bool operator==(const CaseDocument&, const CaseDocument&) = default;
};

struct QueryInstance {
  CaseDocument query;
  std::vector<CaseDocument> candidates;
  std::set<std::string> noticed_ids;

  friend bool operator==(const QueryInstance&, const QueryInstance&) = default;
};

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

inline bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char ch) { return std::isspace(static_cast<unsigned char>(ch)) != 0; });
}

inline std::vector<Paragraph> paragraphs_from_lines(const std::vector<std::string>& lines, std::size_t begin) {
  std::vector<Paragraph> out;
  std::string block;
  auto flush = [&] {
    auto sentences = tokenize(block);
    if (!sentences.empty()) out.push_back(Paragraph{std::move(sentences)});
    block.clear();
  };
  for (std::size_t i = begin; i < lines.size(); ++i) {
    if (is_blank(lines[i])) {
      flush();
    } else {
      block += lines[i];
      block += '\n';
    }
  }
  flush();
  return out;
}

}  // namespace detail

inline CaseDocument parse_case(std::string_view raw_text, std::string id) {
  CaseDocument doc;
  doc.id = std::move(id);
  if (raw_text.empty()) throw Error(ErrorCode::EmptyBody, "document '" + doc.id + "' is empty");

  doc.no_summary_marker_present = raw_text.find(kUneditedMarker) != std::string_view::npos;

  std::vector<std::string> lines;
  for (auto& line : detail::split_lines(raw_text))
    if (line.find(kUneditedMarker) == std::string::npos) lines.push_back(std::move(line));

  std::size_t summary_line = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].rfind(kSummaryIndicator, 0) == 0) {
      summary_line = i;
      break;
    }
  }

  std::size_t body_begin = 0;
  if (summary_line < lines.size()) {
    std::string summary_text;
    bool present_found = false;
    std::size_t i = summary_line;
    std::string first = lines[i].substr(kSummaryIndicator.size());
    for (;; ++i) {
      std::string_view line = (i == summary_line) ? std::string_view(first) : std::string_view(lines[i]);
      if (i != summary_line && detail::is_blank(line)) break;
      std::size_t pos = line.find(kPresentIndicator);
      if (pos != std::string_view::npos) {
        summary_text.append(line.substr(0, pos));
        present_found = true;
        break;
      }
      summary_text.append(line);
      summary_text += '\n';
      if (i + 1 >= lines.size()) break;
    }
    if (present_found) {
      // Skip the rest of the "Present:" paragraph.
      while (i < lines.size() && !detail::is_blank(lines[i])) ++i;
    }
    body_begin = std::min(i + 1, lines.size());
    auto sentences = tokenize(summary_text);
    if (!doc.no_summary_marker_present && !sentences.empty()) doc.summary = std::move(sentences);
  } else {
    for (const auto& line : lines)
      if (line.find(kPresentIndicator) != std::string::npos) doc.orphan_present_indicator = true;
  }

  doc.paragraphs = detail::paragraphs_from_lines(lines, body_begin);
  if (doc.paragraphs.empty())
    throw Error(ErrorCode::EmptyBody, "document '" + doc.id + "' has no paragraph content");
  return doc;
}

/// First sentence of every paragraph, in paragraph order.
inline std::vector<Sentence> lead_sentences(const CaseDocument& doc) {
  std::vector<Sentence> out;
  out.reserve(doc.paragraphs.size());
  for (const auto& p : doc.paragraphs) out.push_back(p.lead());
  return out;
}

// ---------------------------------------------------------------------------
// Corpus layout on disk:
//
//   <root>/<query_id>/<query_file>
//   <root>/<query_id>/<candidates_dir>/<candidate_id><candidate_extension>
//   <root>/<labels_file>        {"<query_id>": ["<candidate_id>", ...], ...}
//
// The labels file is optional (inference corpora).
struct CorpusLayout {
  std::string query_file = "query.txt";
  std::string candidates_dir = "candidates";
  std::string candidate_extension = ".txt";  // empty: every regular file, id = stem
  std::string labels_file = "noticed.json";

  friend bool operator==(const CorpusLayout&, const CorpusLayout&) = default;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::UnreadableFile, path.string());
  return ss.str();
}

namespace detail {

inline CaseDocument parse_case_file(const std::filesystem::path& path, std::string id) {
  try {
    return parse_case(read_text_file(path), std::move(id));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnreadableFile) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

inline std::map<std::string, std::vector<std::string>> read_labels(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> labels;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableFile, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::UnreadableFile, path.string() + ": expected a JSON object");
  for (const auto& [qid, ids] : j.items()) {
    if (!ids.is_array()) throw Error(ErrorCode::UnreadableFile, path.string() + ": entry '" + qid + "' is not an array");
    auto& out = labels[qid];
    for (const auto& cid : ids) {
      if (!cid.is_string()) throw Error(ErrorCode::UnreadableFile, path.string() + ": non-string id under '" + qid + "'");
      out.push_back(cid.get<std::string>());
    }
  }
  return labels;
}

}  // namespace detail

inline std::vector<QueryInstance> load_corpus(const std::filesystem::path& root, const CorpusLayout& layout = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::UnreadableFile, root.string() + ": not a directory");

  std::vector<std::string> query_ids;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) query_ids.push_back(entry.path().filename().string());
  std::sort(query_ids.begin(), query_ids.end());

  std::map<std::string, std::vector<std::string>> labels;
  fs::path labels_path = root / layout.labels_file;
  if (fs::exists(labels_path)) labels = detail::read_labels(labels_path);
  for (const auto& [qid, ids] : labels) {
    if (!std::binary_search(query_ids.begin(), query_ids.end(), qid))
      throw Error(ErrorCode::MissingLabel, labels_path.string() + ": unknown query id '" + qid + "'");
  }

  std::vector<QueryInstance> instances;
  instances.reserve(query_ids.size());
  for (const auto& qid : query_ids) {
    fs::path qdir = root / qid;
    QueryInstance inst;
    inst.query = detail::parse_case_file(qdir / layout.query_file, qid);

    std::map<std::string, fs::path> candidate_files;
    fs::path cdir = qdir / layout.candidates_dir;
    if (fs::is_directory(cdir)) {
      for (const auto& entry : fs::directory_iterator(cdir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path& p = entry.path();
        if (!layout.candidate_extension.empty() && p.extension() != layout.candidate_extension) continue;
        std::string cid = p.stem().string();
        auto [it, inserted] = candidate_files.emplace(cid, p);
        if (!inserted)
          throw Error(ErrorCode::DuplicateCandidateId, p.string() + ": id '" + cid + "' also used by " + it->second.string());
      }
    }
    for (const auto& [cid, path] : candidate_files) inst.candidates.push_back(detail::parse_case_file(path, cid));

    if (auto it = labels.find(qid); it != labels.end()) {
      for (const auto& cid : it->second) {
        if (!candidate_files.count(cid))
          throw Error(ErrorCode::MissingLabel, labels_path.string() + ": query '" + qid + "' lists unknown candidate '" + cid + "'");
        if (!inst.noticed_ids.insert(cid).second)
          throw Error(ErrorCode::DuplicateCandidateId, labels_path.string() + ": query '" + qid + "' lists '" + cid + "' twice");
      }
    }
    instances.push_back(std::move(inst));
  }
  return instances;
}

// ---------------------------------------------------------------------------

struct PropertyStats {
  std::size_t max = 0;
  double avg = 0.0;
  std::size_t documents = 0;

  friend bool operator==(const PropertyStats&, const PropertyStats&) = default;
};

struct StatsReport {
  PropertyStats words_per_doc;
  PropertyStats paragraphs_per_doc;
  // Absent when no document carries a summary.
  std::optional<PropertyStats> summary_words_per_doc;

  friend bool operator==(const StatsReport&, const StatsReport&) = default;
};

namespace detail {

struct Accumulator {
  std::size_t max = 0;
  std::size_t sum = 0;
  std::size_t n = 0;
  void add(std::size_t v) {
    max = std::max(max, v);
    sum += v;
    ++n;
  }
  PropertyStats finish() const {
    return {max, n ? static_cast<double>(sum) / static_cast<double>(n) : 0.0, n};
  }
};

}  // namespace detail

/// Word counts are body tokens; summary words are counted only over documents
/// that have a summary.
inline StatsReport corpus_stats(const std::vector<CaseDocument>& docs) {
  detail::Accumulator words, paragraphs, summary_words;
  for (const auto& d : docs) {
    words.add(d.body_token_count());
    paragraphs.add(d.paragraphs.size());
    if (d.summary) {
      std::size_t n = 0;
      for (const auto& s : *d.summary) n += s.size();
      summary_words.add(n);
    }
  }
  StatsReport r{words.finish(), paragraphs.finish(), std::nullopt};
  if (summary_words.n > 0) r.summary_words_per_doc = summary_words.finish();
  return r;
}

/// Statistics over the candidate documents of a corpus.
inline StatsReport corpus_stats(const std::vector<QueryInstance>& corpus) {
  std::vector<CaseDocument> docs;
  for (const auto& inst : corpus) docs.insert(docs.end(), inst.candidates.begin(), inst.candidates.end());
  return corpus_stats(docs);
}

inline nlohmann::json to_json(const PropertyStats& s) {
  return {{"max", s.max}, {"avg", s.avg}, {"documents", s.documents}};
}

inline nlohmann::json to_json(const StatsReport& r) {
  nlohmann::json j;
  j["words_per_doc"] = to_json(r.words_per_doc);
  j["paragraphs_per_doc"] = to_json(r.paragraphs_per_doc);
  j["summary_words_per_doc"] = r.summary_words_per_doc ? to_json(*r.summary_words_per_doc) : nlohmann::json(nullptr);
  return j;
}

}  // namespace lcr
