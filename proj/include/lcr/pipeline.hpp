#pragma once

// Pipeline configuration and stages.
//
// The configuration is one flat JSON object ("scorer.filters": 300, ...).
// Every stage reads its inputs from the configured corpus paths or from
// artifacts of earlier stages, and writes only inside the output directory:
//
//   stats.json                       ingest
//   scorer.espm, scorer_loss.log     train-scorer
//   summaries/<split>/<q>/<c>.txt    summarize
//   docvectors_<split>.bin           encode
//   features_<split>.tsv             features
//   ranker.esrk                      train-ranker
//   predictions.tsv                  rank
//   report.json, report.txt          evaluate
//   loo_report.json, loo_report.txt  loo
//
// <split> is "train" for corpus.root and "test" for corpus.test_root.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcr/binary_io.hpp"
#include "lcr/corpus.hpp"
#include "lcr/encsum.hpp"
#include "lcr/error.hpp"
#include "lcr/eval.hpp"
#include "lcr/lexmatch.hpp"
#include "lcr/phrase_scorer.hpp"
#include "lcr/ranker.hpp"

namespace lcr {

struct PipelineConfig {
  std::string corpus_root;
  std::string test_root;  // optional held-out corpus
  CorpusLayout layout;
  std::string scorer_train_root;  // summarized case files; empty: summarized documents of corpus_root
  std::string embeddings_path;
  Hyperparams scorer;
  double summary_threshold = kDefaultSummaryThreshold;
  double wlcs_exponent = kDefaultWlcsExponent;
  std::size_t top_k = kDefaultTopK;
  std::string subset = "ES+sp-ple";
  double ranker_C = 1.0;
  std::size_t ranker_epochs = 100;
  std::size_t ranker_cap = 0;
  bool ranker_standardize = true;
  double ranker_tolerance = 1e-6;
  std::uint64_t seed = 1;
  std::string out = "out";

  Hyperparams hyperparams() const {
    Hyperparams hp = scorer;
    hp.seed = seed;
    return hp;
  }

  RankerOptions ranker_options() const {
    RankerOptions o;
    o.C = ranker_C;
    o.epochs = ranker_epochs;
    o.seed = seed;
    o.standardize = ranker_standardize;
    o.tolerance = ranker_tolerance;
    o.cap_per_query = ranker_cap;
    return o;
  }

  FeatureSubset feature_subset() const { return FeatureSubset::parse(subset); }

  void validate() const {
    hyperparams().validate();
    feature_subset();
    if (!(summary_threshold > 0.0 && summary_threshold <= 1.0))
      throw Error(ErrorCode::InvalidConfig, "summary.threshold must be in (0, 1]");
    if (wlcs_exponent < 1.0) throw Error(ErrorCode::InvalidExponent, "lexical.wlcs_exponent must be >= 1");
    if (top_k == 0) throw Error(ErrorCode::InvalidConfig, "rank.k must be positive");
    if (!(ranker_C >= 0.0)) throw Error(ErrorCode::InvalidConfig, "ranker.C must be non-negative");
    if (!(ranker_tolerance >= 0.0)) throw Error(ErrorCode::InvalidConfig, "ranker.tolerance must be non-negative");
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "out must not be empty");
  }

  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b);
};

namespace detail {

struct ConfigField {
  std::string key;
  std::function<nlohmann::json(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const nlohmann::json&)> set;
  bool is_string = false;
};

template <typename Access>
ConfigField config_field(std::string key, Access access) {
  using V = std::remove_reference_t<decltype(access(std::declval<PipelineConfig&>()))>;
  ConfigField f;
  f.key = key;
  f.is_string = std::is_same_v<V, std::string>;
  f.get = [access](const PipelineConfig& c) { return nlohmann::json(access(const_cast<PipelineConfig&>(c))); };
  f.set = [access, key](PipelineConfig& c, const nlohmann::json& v) {
    auto bad = [&](const char* what) {
      throw Error(ErrorCode::InvalidConfig, "config key '" + key + "' expects " + what + ", got " + v.dump());
    };
    if constexpr (std::is_same_v<V, std::string>) {
      if (!v.is_string()) bad("a string");
      access(c) = v.get<std::string>();
    } else if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) bad("true or false");
      access(c) = v.get<bool>();
    } else if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_unsigned()) bad("a non-negative integer");
      access(c) = v.get<V>();
    } else {
      if (!v.is_number()) bad("a number");
      access(c) = v.get<V>();
    }
  };
  return f;
}

inline const std::vector<ConfigField>& config_fields() {
  using C = PipelineConfig;
  static const std::vector<ConfigField> fields = {
      config_field("corpus.root", [](C& c) -> auto& { return c.corpus_root; }),
      config_field("corpus.test_root", [](C& c) -> auto& { return c.test_root; }),
      config_field("corpus.query_file", [](C& c) -> auto& { return c.layout.query_file; }),
      config_field("corpus.candidates_dir", [](C& c) -> auto& { return c.layout.candidates_dir; }),
      config_field("corpus.candidate_extension", [](C& c) -> auto& { return c.layout.candidate_extension; }),
      config_field("corpus.labels_file", [](C& c) -> auto& { return c.layout.labels_file; }),
      config_field("scorer.train_root", [](C& c) -> auto& { return c.scorer_train_root; }),
      config_field("embeddings.path", [](C& c) -> auto& { return c.embeddings_path; }),
      config_field("scorer.embedding_dim", [](C& c) -> auto& { return c.scorer.embedding_dim; }),
      config_field("scorer.filters", [](C& c) -> auto& { return c.scorer.filters; }),
      config_field("scorer.window", [](C& c) -> auto& { return c.scorer.window; }),
      config_field("scorer.hidden", [](C& c) -> auto& { return c.scorer.hidden; }),
      config_field("scorer.learning_rate", [](C& c) -> auto& { return c.scorer.learning_rate; }),
      config_field("scorer.grad_clip_norm", [](C& c) -> auto& { return c.scorer.grad_clip_norm; }),
      config_field("scorer.a1", [](C& c) -> auto& { return c.scorer.a1; }),
      config_field("scorer.a2", [](C& c) -> auto& { return c.scorer.a2; }),
      config_field("scorer.b1", [](C& c) -> auto& { return c.scorer.b1; }),
      config_field("scorer.b2", [](C& c) -> auto& { return c.scorer.b2; }),
      config_field("scorer.margin", [](C& c) -> auto& { return c.scorer.margin; }),
      config_field("scorer.negatives", [](C& c) -> auto& { return c.scorer.negatives; }),
      config_field("scorer.epochs", [](C& c) -> auto& { return c.scorer.epochs; }),
      config_field("scorer.batch_size", [](C& c) -> auto& { return c.scorer.batch_size; }),
      config_field("summary.threshold", [](C& c) -> auto& { return c.summary_threshold; }),
      config_field("lexical.wlcs_exponent", [](C& c) -> auto& { return c.wlcs_exponent; }),
      config_field("features.subset", [](C& c) -> auto& { return c.subset; }),
      config_field("rank.k", [](C& c) -> auto& { return c.top_k; }),
      config_field("ranker.C", [](C& c) -> auto& { return c.ranker_C; }),
      config_field("ranker.epochs", [](C& c) -> auto& { return c.ranker_epochs; }),
      config_field("ranker.cap_per_query", [](C& c) -> auto& { return c.ranker_cap; }),
      config_field("ranker.standardize", [](C& c) -> auto& { return c.ranker_standardize; }),
      config_field("ranker.tolerance", [](C& c) -> auto& { return c.ranker_tolerance; }),
      config_field("seed", [](C& c) -> auto& { return c.seed; }),
      config_field("out", [](C& c) -> auto& { return c.out; }),
  };
  return fields;
}

inline const ConfigField& find_field(const std::string& key) {
  for (const auto& f : config_fields())
    if (f.key == key) return f;
  throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
}

}  // namespace detail

inline bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
  for (const auto& f : detail::config_fields())
    if (f.get(a) != f.get(b)) return false;
  return true;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : detail::config_fields()) j[f.key] = f.get(c);
  return j;
}

inline std::string serialize_config(const PipelineConfig& c) { return to_json(c).dump(2) + "\n"; }

/// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  PipelineConfig c;
  for (const auto& [key, value] : j.items()) detail::find_field(key).set(c, value);
  return c;
}

inline PipelineConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, origin + ": " + e.what());
  }
  return parse_config(j);
}

/// Applies one `key=value` override. String keys take the value verbatim;
/// other keys parse it as a JSON scalar.
inline void apply_override(PipelineConfig& c, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorCode::InvalidConfig, "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  const auto& field = detail::find_field(key);
  if (field.is_string) {
    field.set(c, nlohmann::json(value));
    return;
  }
  nlohmann::json v;
  try {
    v = nlohmann::json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::InvalidConfig, "override '" + assignment + "': cannot parse value");
  }
  field.set(c, v);
}

// ---------------------------------------------------------------------------
// In-memory stages

/// Summarized documents under `dir` (files with `extension`, sorted by name).
inline std::vector<SummarizedDocument> summarized_documents_in(const std::filesystem::path& dir, const std::string& extension) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::UnreadableFile, dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && (extension.empty() || entry.path().extension() == extension)) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<SummarizedDocument> out;
  for (const auto& p : files) {
    CaseDocument doc = parse_case(read_text_file(p), p.stem().string());
    if (doc.summary) out.push_back({doc.id, doc.body_sentences(), *doc.summary});
  }
  return out;
}

inline std::vector<SummarizedDocument> summarized_documents_in(const std::vector<QueryInstance>& corpus) {
  std::vector<SummarizedDocument> out;
  auto take = [&](const CaseDocument& d, const std::string& id) {
    if (d.summary) out.push_back({id, d.body_sentences(), *d.summary});
  };
  for (const auto& q : corpus) {
    take(q.query, q.query.id);
    for (const auto& c : q.candidates) take(c, q.query.id + "/" + c.id);
  }
  return out;
}

struct DocumentEncoding {
  GeneratedSummary summary;
  std::vector<double> vector;  // g(d), length 3c
};

/// Scores the body once and derives both the generated summary and g(d).
template <typename T>
DocumentEncoding encode_document(const PhraseScorer<T>& scorer, const CaseDocument& doc, double threshold) {
  const auto body = doc.body_sentences();
  ScoredDocument<T> scored = scorer.score_document(body);
  return {generate_summary(scored, body, threshold), compose_doc_vector(scored)};
}

/// Lexical and relevance features for one query's candidates.
inline QueryFeatures query_features(const QueryInstance& inst, const std::vector<GeneratedSummary>& summaries,
                                    const std::vector<double>& query_vector,
                                    const std::vector<std::vector<double>>& candidate_vectors,
                                    const FeatureSubset& subset, std::size_t relevance_dims, double wlcs_exponent) {
  QueryFeatures qf;
  qf.query_id = inst.query.id;
  qf.noticed = inst.noticed_ids;
  if (subset.query_summary && subset.has_lexical() && !inst.query.summary)
    throw Error(ErrorCode::MissingQuerySummary, "query '" + inst.query.id + "' has no summary");
  const QueryParts qparts = QueryParts::from(inst.query);
  const bool needs_summary = subset.cand_summary && subset.has_lexical();
  for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
    const CaseDocument& cand = inst.candidates[i];
    TextUnit generated = needs_summary ? summary_text_unit(summaries.at(i)) : TextUnit{};
    LexicalFeatureVector lex{};
    if (subset.has_lexical())
      lex = extract_lexical_features(qparts, CandidateParts::from(cand, std::move(generated)), subset, wlcs_exponent);
    std::vector<double> rel;
    if (subset.relevance) rel = relevance_vector(query_vector, candidate_vectors.at(i));
    qf.candidate_ids.push_back(cand.id);
    qf.features.push_back(combine_features(lex, rel, subset, relevance_dims));
  }
  return qf;
}

/// Whole-corpus features with a trained scorer, scoring each document once.
template <typename T>
std::vector<QueryFeatures> corpus_features(const std::vector<QueryInstance>& corpus, const PhraseScorer<T>& scorer,
                                           const FeatureSubset& subset, double threshold, double wlcs_exponent) {
  std::vector<QueryFeatures> out;
  const std::size_t rel_dims = 3 * scorer.hyper().filters;
  for (const auto& inst : corpus) {
    std::vector<GeneratedSummary> summaries;
    std::vector<std::vector<double>> vectors;
    std::vector<double> qv;
    if (subset.relevance) qv = encode_document(scorer, inst.query, threshold).vector;
    for (const auto& c : inst.candidates) {
      DocumentEncoding e = encode_document(scorer, c, threshold);
      summaries.push_back(std::move(e.summary));
      vectors.push_back(std::move(e.vector));
    }
    out.push_back(query_features(inst, summaries, qv, vectors, subset, rel_dims, wlcs_exponent));
  }
  return out;
}

/// Restricts features to a subset by zeroing inactive blocks (the relevance
/// block must already be present when the subset uses it).
inline std::vector<QueryFeatures> mask_features(std::vector<QueryFeatures> queries, const FeatureSubset& subset) {
  for (auto& q : queries)
    for (auto& row : q.features) {
      for (std::size_t option = 0; option < kOptionCount; ++option)
        if (!subset.option_active(option))
          std::fill(row.begin() + static_cast<std::ptrdiff_t>(option * kOptionWidth),
                    row.begin() + static_cast<std::ptrdiff_t>((option + 1) * kOptionWidth), 0.0);
      if (!subset.relevance) std::fill(row.begin() + static_cast<std::ptrdiff_t>(kLexicalDims), row.end(), 0.0);
    }
  return queries;
}

// ---------------------------------------------------------------------------
// Artifact formats

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::MalformedLine, where + ": bad number '" + std::string(s) + "'");
  return v;
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
  write_file(path, std::string(bytes.begin(), bytes.end()));
}

inline std::string read_artifact(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingArtifact, path.string());
  return read_text_file(path);
}

}  // namespace detail

/// Rows `query_id \t candidate_id \t label \t f_0 ... f_{n-1}`, queries and
/// candidates in corpus order.
inline std::string format_features(const std::vector<QueryFeatures>& queries) {
  std::string out;
  for (const auto& q : queries)
    for (std::size_t i = 0; i < q.candidate_ids.size(); ++i) {
      out += q.query_id;
      out += '\t';
      out += q.candidate_ids[i];
      out += q.noticed.count(q.candidate_ids[i]) ? "\t1" : "\t0";
      for (double v : q.features[i]) {
        out += '\t';
        out += format_double(v);
      }
      out += '\n';
    }
  return out;
}

inline std::vector<QueryFeatures> parse_features(const std::string& text, const std::string& origin = "<features>") {
  std::vector<QueryFeatures> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0, width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    auto cols = detail::split_tabs(line);
    if (cols.size() < 4) throw Error(ErrorCode::MalformedLine, where + ": expected query, candidate, label and features");
    if (width == 0) width = cols.size();
    if (cols.size() != width) throw Error(ErrorCode::MalformedLine, where + ": inconsistent feature count");
    if (cols[2] != "0" && cols[2] != "1") throw Error(ErrorCode::MalformedLine, where + ": label must be 0 or 1");
    if (out.empty() || out.back().query_id != cols[0]) {
      out.emplace_back();
      out.back().query_id = std::string(cols[0]);
    }
    QueryFeatures& q = out.back();
    q.candidate_ids.emplace_back(cols[1]);
    if (cols[2] == "1") q.noticed.insert(std::string(cols[1]));
    std::vector<double> row;
    row.reserve(cols.size() - 3);
    for (std::size_t k = 3; k < cols.size(); ++k) row.push_back(parse_double(cols[k], where));
    q.features.push_back(std::move(row));
  }
  return out;
}

/// Rows `query_id \t candidate_id \t rank \t score \t predicted_flag`.
inline std::string format_predictions(const std::vector<QueryResult>& results) {
  std::string out;
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
      const auto& e = r.ranked[i];
      out += r.query_id + '\t' + e.candidate_id + '\t' + std::to_string(i + 1) + '\t' + format_double(e.score) + '\t' +
             (r.predicted.count(e.candidate_id) ? "1" : "0") + '\n';
    }
  return out;
}

inline std::vector<QueryResult> parse_predictions(const std::string& text, const std::string& origin = "<predictions>") {
  std::vector<QueryResult> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    auto cols = detail::split_tabs(line);
    if (cols.size() != 5) throw Error(ErrorCode::MalformedLine, where + ": expected 5 columns");
    if (out.empty() || out.back().query_id != cols[0]) {
      out.emplace_back();
      out.back().query_id = std::string(cols[0]);
    }
    QueryResult& r = out.back();
    if (parse_double(cols[2], where) != static_cast<double>(r.ranked.size() + 1))
      throw Error(ErrorCode::MalformedLine, where + ": ranks must be consecutive from 1");
    r.ranked.push_back({std::string(cols[1]), parse_double(cols[3], where)});
    if (cols[4] == "1") r.predicted.insert(std::string(cols[1]));
    else if (cols[4] != "0") throw Error(ErrorCode::MalformedLine, where + ": predicted flag must be 0 or 1");
  }
  return out;
}

inline constexpr std::string_view kDocVectorMagic = "ESDV";
inline constexpr std::uint32_t kDocVectorFormatVersion = 1;

/// Keys are "<query id>" for queries and "<query id>/<candidate id>" for candidates.
using DocVectors = std::map<std::string, std::vector<double>>;

inline std::vector<char> serialize(const DocVectors& vectors, std::size_t dims) {
  io::Writer w(kDocVectorMagic, kDocVectorFormatVersion);
  w.u32(static_cast<std::uint32_t>(vectors.size()));
  w.u32(static_cast<std::uint32_t>(dims));
  for (const auto& [key, v] : vectors) {
    if (v.size() != dims) throw Error(ErrorCode::ShapeMismatch, "document vector '" + key + "' has wrong length");
    w.str(key);
    w.f32s(v);
  }
  return w.bytes();
}

inline DocVectors deserialize_doc_vectors(std::vector<char> bytes, std::string origin = "<memory>") {
  io::Reader r(std::move(bytes), kDocVectorMagic, kDocVectorFormatVersion, std::move(origin));
  const std::size_t count = r.u32(), dims = r.u32();
  DocVectors out;
  for (std::size_t i = 0; i < count; ++i) {
    std::string key = r.str();
    out[key] = r.f32s<double>(dims);
  }
  r.expect_end();
  return out;
}

// ---------------------------------------------------------------------------
// Commands

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config) : config_(std::move(config)) {
    config_.validate();
    out_ = config_.out;
  }

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& out_dir() const { return out_; }

  std::vector<std::string> splits() const {
    std::vector<std::string> s{"train"};
    if (!config_.test_root.empty()) s.push_back("test");
    return s;
  }

  void ingest() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& split : splits()) {
      auto corpus = load(split);
      std::vector<CaseDocument> queries;
      std::size_t labeled = 0, candidates = 0;
      for (const auto& q : corpus) {
        queries.push_back(q.query);
        labeled += q.noticed_ids.empty() ? 0 : 1;
        candidates += q.candidates.size();
      }
      j[split] = {{"queries", queries.size()},
                  {"labeled_queries", labeled},
                  {"candidates", candidates},
                  {"query_documents", to_json(corpus_stats(queries))},
                  {"candidate_documents", to_json(corpus_stats(corpus))}};
    }
    detail::write_file(out_ / "stats.json", j.dump(2) + "\n");
  }

  void train_scorer() const {
    auto embeddings = embeddings_table();
    std::vector<SummarizedDocument> docs = config_.scorer_train_root.empty()
                                               ? summarized_documents_in(load("train"))
                                               : summarized_documents_in(config_.scorer_train_root, config_.layout.candidate_extension);
    std::string log;
    auto model = train_phrase_scorer<float>(docs, config_.hyperparams(), embeddings, [&](const EpochLog& e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "\t%.3f\n", e.wall_ms);
      log += std::to_string(e.epoch) + '\t' + format_double(e.mean_loss) + buf;
    });
    detail::write_bytes(out_ / "scorer.espm", serialize(model));
    detail::write_file(out_ / "scorer_loss.log", log);
  }

  void summarize() const {
    auto scorer = load_scorer();
    for (const auto& split : splits()) {
      for (const auto& q : load(split))
        for (const auto& c : q.candidates) {
          const auto body = c.body_sentences();
          auto summary = generate_summary(scorer.score_document(body), body, config_.summary_threshold);
          detail::write_file(summary_path(split, q.query.id, c.id), format_summary(summary));
        }
    }
  }

  void encode() const {
    auto scorer = load_scorer();
    const std::size_t dims = 3 * scorer.hyper().filters;
    for (const auto& split : splits()) {
      DocVectors vectors;
      for (const auto& q : load(split)) {
        vectors[q.query.id] = compose_doc_vector(scorer.score_document(q.query.body_sentences()));
        for (const auto& c : q.candidates)
          vectors[q.query.id + "/" + c.id] = compose_doc_vector(scorer.score_document(c.body_sentences()));
      }
      detail::write_bytes(out_ / ("docvectors_" + split + ".bin"), serialize(vectors, dims));
    }
  }

  void features() const {
    const FeatureSubset subset = config_.feature_subset();
    for (const auto& split : splits()) {
      DocVectors vectors;
      std::size_t rel_dims = 3 * config_.scorer.filters;
      if (subset.relevance) {
        auto path = out_ / ("docvectors_" + split + ".bin");
        vectors = deserialize_doc_vectors(bytes_of(path), path.string());
        if (!vectors.empty()) rel_dims = vectors.begin()->second.size();
      }
      const bool needs_summaries = subset.cand_summary && subset.has_lexical();
      std::vector<QueryFeatures> rows;
      for (const auto& q : load(split)) {
        std::vector<GeneratedSummary> summaries;
        std::vector<std::vector<double>> cvecs;
        for (const auto& c : q.candidates) {
          if (needs_summaries) {
            auto path = summary_path(split, q.query.id, c.id);
            summaries.push_back(parse_summary(detail::read_artifact(path), path.string()));
          }
          if (subset.relevance) cvecs.push_back(vector_for(vectors, q.query.id + "/" + c.id));
        }
        std::vector<double> qv = subset.relevance ? vector_for(vectors, q.query.id) : std::vector<double>{};
        rows.push_back(query_features(q, summaries, qv, cvecs, subset, rel_dims, config_.wlcs_exponent));
      }
      detail::write_file(features_path(split), format_features(rows));
    }
  }

  void train_ranker() const {
    auto queries = load_features("train");
    PairSet pairs = build_pairs(queries, config_.ranker_cap, config_.seed);
    if (pairs.pairs.empty()) throw Error(ErrorCode::NoPairs, "no query has both noticed and non-noticed candidates");
    detail::write_bytes(out_ / "ranker.esrk", serialize(train_rank_svm(pairs, config_.ranker_options())));
  }

  void rank() const {
    auto path = out_ / "ranker.esrk";
    RankModel model = deserialize_rank_model(bytes_of(path), path.string());
    std::vector<QueryResult> results;
    for (const auto& q : load_features(eval_split())) {
      QueryResult r;
      r.query_id = q.query_id;
      r.ranked = rank_candidates(model, q);
      r.predicted = select_top_k(r.ranked, config_.top_k);
      results.push_back(std::move(r));
    }
    detail::write_file(out_ / "predictions.tsv", format_predictions(results));
  }

  EvalReport evaluate() const {
    auto path = out_ / "predictions.tsv";
    auto results = parse_predictions(detail::read_artifact(path), path.string());
    std::map<std::string, std::set<std::string>> labels;
    for (const auto& q : load_features(eval_split())) labels[q.query_id] = q.noticed;
    std::vector<QueryResult> scored;
    for (auto& r : results) {
      auto it = labels.find(r.query_id);
      if (it == labels.end()) throw Error(ErrorCode::MissingLabel, "predictions mention unknown query '" + r.query_id + "'");
      if (it->second.empty()) continue;  // unlabeled queries cannot be scored
      r.relevant = it->second;
      scored.push_back(std::move(r));
    }
    EvalReport report = evaluate_results(scored);
    write_report("report", report);
    return report;
  }

  EvalReport loo() const {
    LooOutcome outcome = leave_one_out(load_features("train"), config_.ranker_options(), config_.top_k);
    write_report("loo_report", outcome.report, outcome.skipped_unlabeled);
    return outcome.report;
  }

  std::filesystem::path summary_path(const std::string& split, const std::string& qid, const std::string& cid) const {
    return out_ / "summaries" / split / qid / (cid + ".txt");
  }
  std::filesystem::path features_path(const std::string& split) const { return out_ / ("features_" + split + ".tsv"); }

 private:
  std::vector<QueryInstance> load(const std::string& split) const {
    const std::string& root = split == "train" ? config_.corpus_root : config_.test_root;
    if (root.empty()) throw Error(ErrorCode::InvalidConfig, "corpus.root is not set");
    return load_corpus(root, config_.layout);
  }

  std::shared_ptr<const EmbeddingTable> embeddings_table() const {
    if (config_.embeddings_path.empty()) throw Error(ErrorCode::InvalidConfig, "embeddings.path is not set");
    return std::make_shared<EmbeddingTable>(load_embeddings(config_.embeddings_path, config_.scorer.embedding_dim));
  }

  PhraseScorer<float> load_scorer() const {
    auto path = out_ / "scorer.espm";
    auto model = deserialize_scorer<float>(bytes_of(path), nullptr, path.string());
    if (model.hyper().embedding_dim != config_.scorer.embedding_dim)
      throw Error(ErrorCode::ShapeMismatch, path.string() + ": embedding size differs from scorer.embedding_dim");
    model.set_embeddings(embeddings_table());
    return model;
  }

  static std::vector<char> bytes_of(const std::filesystem::path& path) {
    std::string s = detail::read_artifact(path);
    return {s.begin(), s.end()};
  }

  static const std::vector<double>& vector_for(const DocVectors& vectors, const std::string& key) {
    auto it = vectors.find(key);
    if (it == vectors.end()) throw Error(ErrorCode::MissingArtifact, "no document vector for '" + key + "'");
    return it->second;
  }

  std::string eval_split() const { return config_.test_root.empty() ? "train" : "test"; }

  std::vector<QueryFeatures> load_features(const std::string& split) const {
    auto path = features_path(split);
    return parse_features(detail::read_artifact(path), path.string());
  }

  static EvalReport evaluate_results(const std::vector<QueryResult>& results) { return lcr::evaluate(results); }

  void write_report(const std::string& stem, const EvalReport& report, std::size_t skipped = 0) const {
    nlohmann::json j = to_json(report);
    j["features"] = config_.subset;
    j["k"] = config_.top_k;
    if (stem == "loo_report") j["skipped_unlabeled"] = skipped;
    detail::write_file(out_ / (stem + ".json"), j.dump(2) + "\n");
    detail::write_file(out_ / (stem + ".txt"), format_table({{config_.subset, report}}));
  }

  PipelineConfig config_;
  std::filesystem::path out_;
};

}  // namespace lcr
