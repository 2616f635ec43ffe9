#pragma once

// Summary-supervised phrase scoring network.
//
//   f_p = ReLU(W_c [v(w_j); ...; v(w_{j+l-1})])        phrase features (no bias)
//   f_s = max_j f_p,   f_d = max_i f_s                  coordinate-wise pooling
//   P   = sigmoid(W_2 tanh(W_1 [f_p; f_s; f_d] + b_1) + b_2)
//
// Training pushes the score statistics of a document's summary phrases above
// those of its body phrases and below them when the summary is scored in the
// context of another document:
//
//   L_d = max(0, m - ( a1 (E_c - E_s)
//                    + a2 mean_{d'} (E_{s'} - E_{c,d'})
//                    + b1 ((E_c + std_c) - (E_s + std_s))
//                    + b2 ((E_c - std_c) - E_s) ))
//
// Summary phrases are scored with their own sentence feature and the
// *document's* f_d. Sentences shorter than l are right-padded with zero
// vectors, so every sentence yields at least one phrase. Embeddings are
// frozen; W_c, W_1, b_1, W_2, b_2 are trained with Adam and global-norm
// gradient clipping.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcr/binary_io.hpp"
#include "lcr/error.hpp"
#include "lcr/random.hpp"
#include "lcr/text.hpp"

namespace lcr {

// ---------------------------------------------------------------------------
// Embeddings

/// Frozen word vectors. Lookup tries the surface form, then its lowercase;
/// unknown tokens map to the zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim), zero_(dim, 0.0f) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }

  void add(const std::string& token, std::span<const float> vec) {
    if (vec.size() != dim_)
      throw Error(ErrorCode::ShapeMismatch, "embedding for '" + token + "' has " + std::to_string(vec.size()) +
                                                " values, expected " + std::to_string(dim_));
    auto [it, inserted] = index_.emplace(token, values_.size() / std::max<std::size_t>(dim_, 1));
    if (inserted) {
      values_.insert(values_.end(), vec.begin(), vec.end());
    } else {
      std::copy(vec.begin(), vec.end(), values_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    }
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  /// Null for unknown tokens.
  const float* find(const std::string& token) const {
    if (auto it = index_.find(token); it != index_.end()) return values_.data() + it->second * dim_;
    if (auto it = index_.find(to_lower(token)); it != index_.end()) return values_.data() + it->second * dim_;
    return nullptr;
  }

  std::span<const float> lookup(const std::string& token) const {
    const float* p = find(token);
    return p ? std::span<const float>(p, dim_) : std::span<const float>(zero_);
  }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> values_;
  std::vector<float> zero_;
};

/// Text format: one entry per line, `token v_1 ... v_d`, whitespace separated.
/// Empty lines are skipped.
inline EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  EmbeddingTable table(dim);
  std::string line;
  std::vector<float> vec;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string token, field;
    fields >> token;
    vec.clear();
    while (fields >> field) {
      char* end = nullptr;
      float v = std::strtof(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0')
        throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      vec.push_back(v);
    }
    if (vec.size() != dim)
      throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                                std::to_string(dim + 1) + " fields, got " + std::to_string(vec.size() + 1));
    table.add(token, vec);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Hyperparameters

struct Hyperparams {
  std::size_t embedding_dim = 300;  // d
  std::size_t filters = 300;        // c
  std::size_t window = 5;           // l
  std::size_t hidden = 300;         // h
  double learning_rate = 1e-4;
  double grad_clip_norm = 5.0;
  double a1 = 1.0;
  double a2 = 1.7;
  double b1 = 0.3;
  double b2 = 0.7;
  double margin = 0.5;
  std::size_t negatives = 2;
  std::size_t epochs = 20;
  std::size_t batch_size = 1;
  std::uint64_t seed = 1;

  void validate() const {
    auto bad = [](const std::string& what) { return Error(ErrorCode::InvalidConfig, "hyperparameter " + what); };
    if (embedding_dim == 0 || filters == 0 || window == 0 || hidden == 0) throw bad("dimensions must be positive");
    if (!(learning_rate > 0) || !(grad_clip_norm > 0)) throw bad("learning rate and clip norm must be positive");
    if (!(a1 >= 0) || !(a2 >= 0) || !(b1 >= 0) || !(b2 >= 0)) throw bad("loss coefficients must be non-negative");
    if (!(margin > 0)) throw bad("margin must be positive");
    if (batch_size == 0) throw bad("batch size must be positive");
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// ---------------------------------------------------------------------------
// Parameters

/// Trainable parameters; also used for gradients and optimizer moments.
template <typename T>
struct ScorerParams {
  std::vector<T> conv;  // c x (d*l), row-major
  std::vector<T> w1;    // h x 3c, row-major
  std::vector<T> b1;    // h
  std::vector<T> w2;    // h
  T b2 = 0;

  static ScorerParams zeros(const Hyperparams& hp) {
    ScorerParams p;
    p.conv.assign(hp.filters * hp.embedding_dim * hp.window, T(0));
    p.w1.assign(hp.hidden * 3 * hp.filters, T(0));
    p.b1.assign(hp.hidden, T(0));
    p.w2.assign(hp.hidden, T(0));
    return p;
  }

  /// Visits every scalar in a fixed order: conv, w1, b1, w2, b2.
  template <typename F>
  void for_each(F&& f) {
    for (auto& v : conv) f(v);
    for (auto& v : w1) f(v);
    for (auto& v : b1) f(v);
    for (auto& v : w2) f(v);
    f(b2);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& v : conv) f(v);
    for (const auto& v : w1) f(v);
    for (const auto& v : b1) f(v);
    for (const auto& v : w2) f(v);
    f(b2);
  }

  std::size_t size() const { return conv.size() + w1.size() + b1.size() + w2.size() + 1; }

  /// Flat access in for_each order.
  T& at(std::size_t i) {
    if (i < conv.size()) return conv[i];
    i -= conv.size();
    if (i < w1.size()) return w1[i];
    i -= w1.size();
    if (i < b1.size()) return b1[i];
    i -= b1.size();
    if (i < w2.size()) return w2[i];
    return b2;
  }

  friend bool operator==(const ScorerParams&, const ScorerParams&) = default;
};

// ---------------------------------------------------------------------------
// Forward results

/// One scored phrase window: tokens [start, start + length) of `sentence`.
struct PhraseWindow {
  std::size_t sentence = 0;
  std::size_t start = 0;
  std::size_t length = 0;
};

template <typename T>
struct ScoredSentence {
  std::vector<std::vector<T>> phrase_features;  // f_p per window
  std::vector<T> sentence_feature;              // f_s
  std::vector<T> scores;                        // P per window
  std::size_t token_count = 0;
};

template <typename T>
struct ScoredDocument {
  std::vector<ScoredSentence<T>> sentences;
  std::vector<T> document_feature;  // f_d
  std::size_t window = 0;

  std::size_t phrase_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.scores.size();
    return n;
  }

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.token_count;
    return n;
  }

  std::vector<T> all_scores() const {
    std::vector<T> out;
    for (const auto& s : sentences) out.insert(out.end(), s.scores.begin(), s.scores.end());
    return out;
  }

  /// Phrase windows in document order, aligned with all_scores().
  std::vector<PhraseWindow> windows() const {
    std::vector<PhraseWindow> out;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto& s = sentences[i];
      for (std::size_t j = 0; j < s.scores.size(); ++j)
        out.push_back({i, j, std::min(window, s.token_count - j)});
    }
    return out;
  }
};

/// Coordinate-wise maximum of a non-empty list of vectors.
template <typename T>
std::vector<T> max_pool(const std::vector<std::vector<T>>& vectors) {
  if (vectors.empty()) throw Error(ErrorCode::EmptyInput, "max pooling over an empty list");
  std::vector<T> out = vectors.front();
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != out.size()) throw Error(ErrorCode::LengthMismatch, "max pooling over ragged vectors");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::max(out[k], vectors[i][k]);
  }
  return out;
}

template <typename T>
std::vector<T> sentence_feature(const std::vector<std::vector<T>>& phrase_features) {
  return max_pool(phrase_features);
}

template <typename T>
std::vector<T> document_feature(const std::vector<std::vector<T>>& sentence_features) {
  return max_pool(sentence_features);
}

// ---------------------------------------------------------------------------
// Loss

struct LossTerms {
  double e_c = 0, std_c = 0;  // summary phrases in their own document
  double e_s = 0, std_s = 0;  // document phrases
  std::vector<double> e_c_neg;  // summary phrases in the context of each negative document
  std::vector<double> e_s_neg;  // each negative document's own phrases
};

namespace detail {

template <typename T>
std::pair<double, double> mean_std(std::span<const T> xs) {
  double mean = 0;
  for (T x : xs) mean += static_cast<double>(x);
  mean /= static_cast<double>(xs.size());
  double var = 0;
  for (T x : xs) {
    double d = static_cast<double>(x) - mean;
    var += d * d;
  }
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

}  // namespace detail

/// Population mean/stddev statistics. `summary_on_negatives[k]` are the
/// summary's scores in the context of negative document k and
/// `negative_doc_scores[k]` that document's own phrase scores.
template <typename T>
LossTerms loss_terms(std::span<const T> summary_scores, std::span<const T> doc_scores,
                     const std::vector<std::vector<T>>& summary_on_negatives,
                     const std::vector<std::vector<T>>& negative_doc_scores) {
  if (summary_scores.empty() || doc_scores.empty()) throw Error(ErrorCode::EmptyScores, "summary and document scores must be non-empty");
  if (summary_on_negatives.size() != negative_doc_scores.size())
    throw Error(ErrorCode::LengthMismatch, "one summary score list per negative document expected");
  LossTerms t;
  std::tie(t.e_c, t.std_c) = detail::mean_std(summary_scores);
  std::tie(t.e_s, t.std_s) = detail::mean_std(doc_scores);
  for (std::size_t k = 0; k < summary_on_negatives.size(); ++k) {
    if (summary_on_negatives[k].empty() || negative_doc_scores[k].empty())
      throw Error(ErrorCode::EmptyScores, "negative score lists must be non-empty");
    t.e_c_neg.push_back(detail::mean_std(std::span<const T>(summary_on_negatives[k])).first);
    t.e_s_neg.push_back(detail::mean_std(std::span<const T>(negative_doc_scores[k])).first);
  }
  return t;
}

/// The bracketed constraint combination that the hinge compares against m.
inline double constraint_combination(const LossTerms& t, const Hyperparams& hp) {
  double neg = 0;
  if (!t.e_c_neg.empty()) {
    for (std::size_t k = 0; k < t.e_c_neg.size(); ++k) neg += t.e_s_neg[k] - t.e_c_neg[k];
    neg /= static_cast<double>(t.e_c_neg.size());
  }
  return hp.a1 * (t.e_c - t.e_s) + hp.a2 * neg + hp.b1 * ((t.e_c + t.std_c) - (t.e_s + t.std_s)) +
         hp.b2 * ((t.e_c - t.std_c) - t.e_s);
}

inline double loss(const LossTerms& t, const Hyperparams& hp) {
  return std::max(0.0, hp.margin - constraint_combination(t, hp));
}

// ---------------------------------------------------------------------------

/// One training example: a document body, its summary, and sampled negative
/// document bodies. Sentences are token surfaces.
struct TrainingItem {
  const std::vector<Sentence>* document = nullptr;
  const std::vector<Sentence>* summary = nullptr;
  std::vector<const std::vector<Sentence>*> negatives;
};

template <typename T>
class PhraseScorer {
 public:
  PhraseScorer() = default;

  /// Xavier-uniform weights, zero biases.
  PhraseScorer(const Hyperparams& hp, std::shared_ptr<const EmbeddingTable> embeddings)
      : hyper_(hp), embeddings_(std::move(embeddings)), params_(ScorerParams<T>::zeros(hp)) {
    hp.validate();
    check_embeddings();
    Rng rng(hp.seed);
    auto fill = [&](std::vector<T>& w, std::size_t fan_in, std::size_t fan_out) {
      double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : w) v = static_cast<T>(uniform_real(rng, -a, a));
    };
    fill(params_.conv, hp.embedding_dim * hp.window, hp.filters);
    fill(params_.w1, 3 * hp.filters, hp.hidden);
    fill(params_.w2, hp.hidden, 1);
  }

  PhraseScorer(const Hyperparams& hp, std::shared_ptr<const EmbeddingTable> embeddings, ScorerParams<T> params)
      : hyper_(hp), embeddings_(std::move(embeddings)), params_(std::move(params)) {
    hp.validate();
    check_embeddings();
    auto expect = ScorerParams<T>::zeros(hp);
    if (params_.conv.size() != expect.conv.size() || params_.w1.size() != expect.w1.size() ||
        params_.b1.size() != expect.b1.size() || params_.w2.size() != expect.w2.size())
      throw Error(ErrorCode::ShapeMismatch, "parameter shapes do not match hyperparameters");
  }

  const Hyperparams& hyper() const { return hyper_; }
  const ScorerParams<T>& params() const { return params_; }
  ScorerParams<T>& params() { return params_; }
  const std::shared_ptr<const EmbeddingTable>& embeddings() const { return embeddings_; }
  void set_embeddings(std::shared_ptr<const EmbeddingTable> e) {
    embeddings_ = std::move(e);
    check_embeddings();
  }

  /// f_p for every window of a non-empty sentence.
  std::vector<std::vector<T>> phrase_features(const Sentence& sentence) const {
    if (sentence.empty()) throw Error(ErrorCode::EmptyInput, "phrase features of an empty sentence");
    Encoded e = encode({sentence});
    return e.sentences.front().fp;
  }

  /// Scores every phrase of a document part in its own document context.
  ScoredDocument<T> score_document(const std::vector<Sentence>& sentences) const {
    Encoded e = encode(sentences);
    if (e.sentences.empty()) throw Error(ErrorCode::EmptyInput, "scoring a document without sentences");
    pool_document(e);
    return to_scored(e, e.fd);
  }

  /// Scores the phrases of `sentences` with document feature `context_fd`
  /// (e.g. a summary in the context of its document).
  ScoredDocument<T> score_in_context(const std::vector<Sentence>& sentences, const std::vector<T>& context_fd) const {
    if (context_fd.size() != hyper_.filters) throw Error(ErrorCode::LengthMismatch, "context feature has wrong size");
    Encoded e = encode(sentences);
    if (e.sentences.empty()) throw Error(ErrorCode::EmptyInput, "scoring a part without sentences");
    return to_scored(e, context_fd);
  }

  /// Loss of one item (documents, summary and negatives scored from scratch).
  double item_loss(const TrainingItem& item) const {
    Forward f = forward(item);
    return f.loss;
  }

  /// Sum of item losses and its exact gradient with respect to all trainable
  /// parameters (embeddings stay frozen). Adds into `grad`.
  double accumulate_gradients(const TrainingItem& item, ScorerParams<T>& grad) const {
    Forward f = forward(item);
    if (f.loss <= 0.0) return 0.0;  // hinge inactive
    backward(f, grad);
    return f.loss;
  }

  double gradients(const std::vector<TrainingItem>& batch, ScorerParams<T>& grad) const {
    if (batch.empty()) throw Error(ErrorCode::EmptyInput, "gradient of an empty batch");
    grad = ScorerParams<T>::zeros(hyper_);
    double total = 0;
    for (const auto& item : batch) total += accumulate_gradients(item, grad);
    return total;
  }

 private:
  struct EncodedSentence {
    std::vector<const float*> tokens;  // null for unknown tokens
    std::size_t phrases = 0;
    std::vector<std::vector<T>> pre;  // pre-activation per window
    std::vector<std::vector<T>> fp;
    std::vector<T> fs;
    std::vector<std::uint32_t> fs_arg;
  };

  struct Encoded {
    std::vector<EncodedSentence> sentences;
    std::vector<T> fd;
    std::vector<std::uint32_t> fd_arg;
  };

  // Scoring of one encoded part in one document context.
  struct ScorePass {
    std::size_t part = 0;
    std::size_t context = 0;  // index into Forward::parts of the f_d owner
    std::vector<std::vector<T>> hidden;  // tanh activations per phrase (flattened order)
    std::vector<T> scores;
  };

  struct Forward {
    std::vector<Encoded> parts;  // 0: document, 1: summary, 2..: negatives
    std::vector<ScorePass> passes;
    // pass indices
    std::size_t doc_pass = 0, summary_pass = 0;
    std::vector<std::size_t> neg_doc_pass, neg_summary_pass;
    LossTerms terms;
    double combination = 0;
    double loss = 0;
  };

  void check_embeddings() const {
    if (embeddings_ && embeddings_->dim() != hyper_.embedding_dim)
      throw Error(ErrorCode::ShapeMismatch, "embedding dimension " + std::to_string(embeddings_->dim()) +
                                                " does not match model d=" + std::to_string(hyper_.embedding_dim));
  }

  Encoded encode(const std::vector<Sentence>& sentences) const {
    const std::size_t c = hyper_.filters, d = hyper_.embedding_dim, l = hyper_.window;
    Encoded e;
    for (const auto& s : sentences) {
      if (s.empty()) continue;
      EncodedSentence es;
      es.tokens.reserve(s.size());
      for (const auto& t : s.tokens) es.tokens.push_back(embeddings_ ? embeddings_->find(t.surface) : nullptr);
      es.phrases = s.size() >= l ? s.size() - l + 1 : 1;
      es.pre.assign(es.phrases, std::vector<T>(c, T(0)));
      es.fp.assign(es.phrases, std::vector<T>(c, T(0)));
      for (std::size_t j = 0; j < es.phrases; ++j) {
        auto& pre = es.pre[j];
        for (std::size_t pos = 0; pos < l; ++pos) {
          std::size_t tok = j + pos;
          if (tok >= es.tokens.size() || !es.tokens[tok]) continue;
          const float* v = es.tokens[tok];
          for (std::size_t k = 0; k < c; ++k) {
            const T* row = params_.conv.data() + k * d * l + pos * d;
            T acc = 0;
            for (std::size_t x = 0; x < d; ++x) acc += row[x] * static_cast<T>(v[x]);
            pre[k] += acc;
          }
        }
        for (std::size_t k = 0; k < c; ++k) es.fp[j][k] = pre[k] > T(0) ? pre[k] : T(0);
      }
      es.fs = es.fp[0];
      es.fs_arg.assign(c, 0);
      for (std::size_t j = 1; j < es.phrases; ++j)
        for (std::size_t k = 0; k < c; ++k)
          if (es.fp[j][k] > es.fs[k]) {
            es.fs[k] = es.fp[j][k];
            es.fs_arg[k] = static_cast<std::uint32_t>(j);
          }
      e.sentences.push_back(std::move(es));
    }
    return e;
  }

  void pool_document(Encoded& e) const {
    const std::size_t c = hyper_.filters;
    e.fd = e.sentences.front().fs;
    e.fd_arg.assign(c, 0);
    for (std::size_t i = 1; i < e.sentences.size(); ++i)
      for (std::size_t k = 0; k < c; ++k)
        if (e.sentences[i].fs[k] > e.fd[k]) {
          e.fd[k] = e.sentences[i].fs[k];
          e.fd_arg[k] = static_cast<std::uint32_t>(i);
        }
  }

  // MLP on [f_p; f_s; f_d]; writes tanh activations into `hidden`.
  T mlp(const std::vector<T>& fp, const std::vector<T>& fs, const std::vector<T>& fd, std::vector<T>& hidden) const {
    const std::size_t c = hyper_.filters, h = hyper_.hidden;
    hidden.assign(h, T(0));
    T out = params_.b2;
    for (std::size_t r = 0; r < h; ++r) {
      const T* row = params_.w1.data() + r * 3 * c;
      T u = params_.b1[r];
      for (std::size_t k = 0; k < c; ++k) u += row[k] * fp[k];
      for (std::size_t k = 0; k < c; ++k) u += row[c + k] * fs[k];
      for (std::size_t k = 0; k < c; ++k) u += row[2 * c + k] * fd[k];
      hidden[r] = std::tanh(u);
      out += params_.w2[r] * hidden[r];
    }
    return T(1) / (T(1) + std::exp(-out));
  }

  ScorePass run_pass(const Encoded& part, const std::vector<T>& fd) const {
    ScorePass p;
    for (const auto& s : part.sentences)
      for (std::size_t j = 0; j < s.phrases; ++j) {
        p.hidden.emplace_back();
        p.scores.push_back(mlp(s.fp[j], s.fs, fd, p.hidden.back()));
      }
    return p;
  }

  ScoredDocument<T> to_scored(const Encoded& e, const std::vector<T>& fd) const {
    ScoredDocument<T> out;
    out.window = hyper_.window;
    out.document_feature = fd;
    std::vector<T> hidden;
    for (const auto& s : e.sentences) {
      ScoredSentence<T> ss;
      ss.phrase_features = s.fp;
      ss.sentence_feature = s.fs;
      ss.token_count = s.tokens.size();
      for (std::size_t j = 0; j < s.phrases; ++j) ss.scores.push_back(mlp(s.fp[j], s.fs, fd, hidden));
      out.sentences.push_back(std::move(ss));
    }
    return out;
  }

  Forward forward(const TrainingItem& item) const {
    Forward f;
    f.parts.reserve(2 + item.negatives.size());
    f.parts.push_back(encode(*item.document));
    f.parts.push_back(encode(*item.summary));
    for (const auto* neg : item.negatives) f.parts.push_back(encode(*neg));
    for (std::size_t i = 0; i < f.parts.size(); ++i) {
      if (f.parts[i].sentences.empty())
        throw Error(ErrorCode::EmptyScores, i == 1 ? "training summary has no tokens" : "training document has no tokens");
      if (i != 1) pool_document(f.parts[i]);
    }

    auto add_pass = [&](std::size_t part, std::size_t context) {
      ScorePass p = run_pass(f.parts[part], f.parts[context].fd);
      p.part = part;
      p.context = context;
      f.passes.push_back(std::move(p));
      return f.passes.size() - 1;
    };
    f.doc_pass = add_pass(0, 0);
    f.summary_pass = add_pass(1, 0);
    std::vector<std::vector<T>> summary_on_neg, neg_doc;
    for (std::size_t k = 0; k < item.negatives.size(); ++k) {
      f.neg_doc_pass.push_back(add_pass(2 + k, 2 + k));
      f.neg_summary_pass.push_back(add_pass(1, 2 + k));
      summary_on_neg.push_back(f.passes[f.neg_summary_pass.back()].scores);
      neg_doc.push_back(f.passes[f.neg_doc_pass.back()].scores);
    }
    f.terms = loss_terms<T>(f.passes[f.summary_pass].scores, f.passes[f.doc_pass].scores, summary_on_neg, neg_doc);
    f.combination = constraint_combination(f.terms, hyper_);
    f.loss = std::max(0.0, hyper_.margin - f.combination);
    return f;
  }

  // dL/dP for one score list given dL/dE and dL/dstd.
  static std::vector<T> stat_grad(const std::vector<T>& scores, double g_mean, double g_std, double mean, double std) {
    const double n = static_cast<double>(scores.size());
    std::vector<T> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      double g = g_mean / n;
      if (std > 0) g += g_std * (static_cast<double>(scores[i]) - mean) / (n * std);
      out[i] = static_cast<T>(g);
    }
    return out;
  }

  void backward(const Forward& f, ScorerParams<T>& grad) const {
    const std::size_t c = hyper_.filters, h = hyper_.hidden, d = hyper_.embedding_dim, l = hyper_.window;
    const auto& t = f.terms;
    const Hyperparams& hp = hyper_;
    // L = m - combination on the active side of the hinge.
    const double g_ec = -(hp.a1 + hp.b1 + hp.b2);
    const double g_stdc = -(hp.b1 - hp.b2);
    const double g_es = hp.a1 + hp.b1 + hp.b2;
    const double g_stds = hp.b1;
    const double k_neg = static_cast<double>(f.neg_doc_pass.size());

    std::vector<std::vector<T>> d_scores(f.passes.size());
    d_scores[f.summary_pass] = stat_grad(f.passes[f.summary_pass].scores, g_ec, g_stdc, t.e_c, t.std_c);
    d_scores[f.doc_pass] = stat_grad(f.passes[f.doc_pass].scores, g_es, g_stds, t.e_s, t.std_s);
    for (std::size_t k = 0; k < f.neg_doc_pass.size(); ++k) {
      d_scores[f.neg_doc_pass[k]] = stat_grad(f.passes[f.neg_doc_pass[k]].scores, -hp.a2 / k_neg, 0, t.e_s_neg[k], 0);
      d_scores[f.neg_summary_pass[k]] = stat_grad(f.passes[f.neg_summary_pass[k]].scores, hp.a2 / k_neg, 0, t.e_c_neg[k], 0);
    }

    // Upstream gradients on pooled features per part.
    struct PartGrad {
      std::vector<std::vector<std::vector<T>>> dfp;  // [sentence][phrase][k]
      std::vector<std::vector<T>> dfs;               // [sentence][k]
      std::vector<T> dfd;
    };
    std::vector<PartGrad> pg(f.parts.size());
    for (std::size_t i = 0; i < f.parts.size(); ++i) {
      const auto& part = f.parts[i];
      pg[i].dfd.assign(c, T(0));
      for (const auto& s : part.sentences) {
        pg[i].dfp.emplace_back(s.phrases, std::vector<T>(c, T(0)));
        pg[i].dfs.emplace_back(c, T(0));
      }
    }

    std::vector<T> du(h);
    for (std::size_t pi = 0; pi < f.passes.size(); ++pi) {
      const ScorePass& pass = f.passes[pi];
      const std::size_t part_index = pass.part;
      const Encoded& part = f.parts[part_index];
      const std::vector<T>& fd = f.parts[pass.context].fd;
      std::size_t flat = 0;
      for (std::size_t si = 0; si < part.sentences.size(); ++si) {
        const auto& s = part.sentences[si];
        for (std::size_t j = 0; j < s.phrases; ++j, ++flat) {
          const T p = pass.scores[flat];
          const T d_out = d_scores[pi][flat] * p * (T(1) - p);
          if (d_out == T(0)) continue;
          const auto& hid = pass.hidden[flat];
          grad.b2 += d_out;
          for (std::size_t r = 0; r < h; ++r) {
            grad.w2[r] += d_out * hid[r];
            du[r] = d_out * params_.w2[r] * (T(1) - hid[r] * hid[r]);
            grad.b1[r] += du[r];
          }
          auto& dfp = pg[part_index].dfp[si][j];
          auto& dfs = pg[part_index].dfs[si];
          auto& dfd = pg[pass.context].dfd;
          for (std::size_t r = 0; r < h; ++r) {
            const T g = du[r];
            T* grow = grad.w1.data() + r * 3 * c;
            const T* wrow = params_.w1.data() + r * 3 * c;
            for (std::size_t k = 0; k < c; ++k) {
              grow[k] += g * s.fp[j][k];
              dfp[k] += g * wrow[k];
            }
            for (std::size_t k = 0; k < c; ++k) {
              grow[c + k] += g * s.fs[k];
              dfs[k] += g * wrow[c + k];
            }
            for (std::size_t k = 0; k < c; ++k) {
              grow[2 * c + k] += g * fd[k];
              dfd[k] += g * wrow[2 * c + k];
            }
          }
        }
      }
    }

    // Route pooled gradients back to phrase features, then through ReLU and W_c.
    for (std::size_t i = 0; i < f.parts.size(); ++i) {
      const Encoded& part = f.parts[i];
      PartGrad& g = pg[i];
      if (!part.fd.empty())
        for (std::size_t k = 0; k < c; ++k) g.dfs[part.fd_arg[k]][k] += g.dfd[k];
      for (std::size_t si = 0; si < part.sentences.size(); ++si) {
        const auto& s = part.sentences[si];
        for (std::size_t k = 0; k < c; ++k) g.dfp[si][s.fs_arg[k]][k] += g.dfs[si][k];
        for (std::size_t j = 0; j < s.phrases; ++j) {
          for (std::size_t k = 0; k < c; ++k) {
            if (!(s.pre[j][k] > T(0))) continue;
            const T gk = g.dfp[si][j][k];
            if (gk == T(0)) continue;
            T* grow = grad.conv.data() + k * d * l;
            for (std::size_t pos = 0; pos < l; ++pos) {
              std::size_t tok = j + pos;
              if (tok >= s.tokens.size() || !s.tokens[tok]) continue;
              const float* v = s.tokens[tok];
              T* gp = grow + pos * d;
              for (std::size_t x = 0; x < d; ++x) gp[x] += gk * static_cast<T>(v[x]);
            }
          }
        }
      }
    }
  }

  Hyperparams hyper_;
  std::shared_ptr<const EmbeddingTable> embeddings_;
  ScorerParams<T> params_;
};

// ---------------------------------------------------------------------------
// Training

/// A document usable for training: body sentences plus its expert summary.
struct SummarizedDocument {
  std::string id;
  std::vector<Sentence> body;
  std::vector<Sentence> summary;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0;
  double wall_ms = 0;
};

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) with global-norm gradient
/// clipping. Each epoch visits the documents in a seeded shuffled order and
/// samples `negatives` other documents per document without replacement.
/// Returns the trained model; per-epoch statistics go to `on_epoch`.
template <typename T>
PhraseScorer<T> train_phrase_scorer(const std::vector<SummarizedDocument>& docs, const Hyperparams& hp,
                                    std::shared_ptr<const EmbeddingTable> embeddings,
                                    const std::function<void(const EpochLog&)>& on_epoch = {}) {
  hp.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    bool has_body = false, has_summary = false;
    for (const auto& s : docs[i].body) has_body = has_body || !s.empty();
    for (const auto& s : docs[i].summary) has_summary = has_summary || !s.empty();
    if (has_body && has_summary) usable.push_back(i);
  }
  if (usable.empty()) throw Error(ErrorCode::NoSummarizedDocuments, "no training document has both a summary and a body");

  PhraseScorer<T> model(hp, std::move(embeddings));
  ScorerParams<T> m1 = ScorerParams<T>::zeros(hp), m2 = ScorerParams<T>::zeros(hp);
  ScorerParams<T> grad = ScorerParams<T>::zeros(hp);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t step = 0;
  Rng rng(hp.seed ^ 0x9E3779B97F4A7C15ULL);

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    auto started = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = usable;
    shuffle(order, rng);
    double epoch_loss = 0;
    for (std::size_t b = 0; b < order.size(); b += hp.batch_size) {
      std::vector<TrainingItem> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + hp.batch_size); ++i) {
        TrainingItem item;
        item.document = &docs[order[i]].body;
        item.summary = &docs[order[i]].summary;
        // Negatives: uniform over the other usable documents.
        std::size_t self_pos = static_cast<std::size_t>(std::find(usable.begin(), usable.end(), order[i]) - usable.begin());
        for (std::size_t pick : sample_without_replacement(rng, usable.size() - 1, hp.negatives)) {
          std::size_t other = pick >= self_pos ? pick + 1 : pick;
          item.negatives.push_back(&docs[usable[other]].body);
        }
        batch.push_back(std::move(item));
      }
      epoch_loss += model.gradients(batch, grad);

      double norm2 = 0;
      grad.for_each([&](const T& g) { norm2 += static_cast<double>(g) * static_cast<double>(g); });
      const double norm = std::sqrt(norm2);
      const double scale = norm > hp.grad_clip_norm ? hp.grad_clip_norm / norm : 1.0;

      ++step;
      const double lr_t = hp.learning_rate * std::sqrt(1.0 - std::pow(beta2, static_cast<double>(step))) /
                          (1.0 - std::pow(beta1, static_cast<double>(step)));
      auto& params = model.params();
      const std::size_t n = params.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double g = static_cast<double>(grad.at(i)) * scale;
        T& a = m1.at(i);
        T& v = m2.at(i);
        a = static_cast<T>(beta1 * static_cast<double>(a) + (1 - beta1) * g);
        v = static_cast<T>(beta2 * static_cast<double>(v) + (1 - beta2) * g * g);
        params.at(i) -= static_cast<T>(lr_t * static_cast<double>(a) / (std::sqrt(static_cast<double>(v)) + eps));
      }
    }
    if (on_epoch) {
      double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      on_epoch({epoch, epoch_loss / static_cast<double>(order.size()), ms});
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization: "ESPM" envelope, version 1.
//   u32 d, c, l, h; f64 lr, clip, a1, a2, b1, b2, margin;
//   u32 negatives, epochs, batch; u64 seed;
//   f32 W_c[c*d*l], W_1[h*3c], b_1[h], W_2[h], b_2
// Embeddings are not stored; they are attached from the embedding file.

inline constexpr std::string_view kScorerMagic = "ESPM";
inline constexpr std::uint32_t kScorerFormatVersion = 1;

template <typename T>
std::vector<char> serialize(const PhraseScorer<T>& model) {
  const Hyperparams& hp = model.hyper();
  io::Writer w(kScorerMagic, kScorerFormatVersion);
  w.u32(static_cast<std::uint32_t>(hp.embedding_dim));
  w.u32(static_cast<std::uint32_t>(hp.filters));
  w.u32(static_cast<std::uint32_t>(hp.window));
  w.u32(static_cast<std::uint32_t>(hp.hidden));
  for (double v : {hp.learning_rate, hp.grad_clip_norm, hp.a1, hp.a2, hp.b1, hp.b2, hp.margin}) w.f64(v);
  w.u32(static_cast<std::uint32_t>(hp.negatives));
  w.u32(static_cast<std::uint32_t>(hp.epochs));
  w.u32(static_cast<std::uint32_t>(hp.batch_size));
  w.u64(hp.seed);
  const auto& p = model.params();
  w.f32s(p.conv);
  w.f32s(p.w1);
  w.f32s(p.b1);
  w.f32s(p.w2);
  w.f32(static_cast<float>(p.b2));
  return w.bytes();
}

template <typename T>
PhraseScorer<T> deserialize_scorer(std::vector<char> bytes, std::shared_ptr<const EmbeddingTable> embeddings = nullptr,
                                   std::string origin = "<memory>") {
  io::Reader r(std::move(bytes), kScorerMagic, kScorerFormatVersion, std::move(origin));
  Hyperparams hp;
  hp.embedding_dim = r.u32();
  hp.filters = r.u32();
  hp.window = r.u32();
  hp.hidden = r.u32();
  hp.learning_rate = r.f64();
  hp.grad_clip_norm = r.f64();
  hp.a1 = r.f64();
  hp.a2 = r.f64();
  hp.b1 = r.f64();
  hp.b2 = r.f64();
  hp.margin = r.f64();
  hp.negatives = r.u32();
  hp.epochs = r.u32();
  hp.batch_size = r.u32();
  hp.seed = r.u64();
  ScorerParams<T> p;
  p.conv = r.f32s<T>(hp.filters * hp.embedding_dim * hp.window);
  p.w1 = r.f32s<T>(hp.hidden * 3 * hp.filters);
  p.b1 = r.f32s<T>(hp.hidden);
  p.w2 = r.f32s<T>(hp.hidden);
  p.b2 = static_cast<T>(r.f32());
  r.expect_end();
  return PhraseScorer<T>(hp, std::move(embeddings), std::move(p));
}

template <typename T>
void save_model(const PhraseScorer<T>& model, const std::filesystem::path& path) {
  auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T = float>
PhraseScorer<T> load_model(const std::filesystem::path& path, std::shared_ptr<const EmbeddingTable> embeddings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifact, path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_scorer<T>(std::move(bytes), std::move(embeddings), path.string());
}

}  // namespace lcr
