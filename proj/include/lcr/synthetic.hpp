#pragma once

// Synthetic case corpora with planted structure.
//
// The vocabulary has two kinds of words:
//   - filler words, whose embeddings share a common "filler" direction;
//   - topic words, whose embeddings share a "salient" direction plus a
//     per-topic center. Every topic word has a synonym: a different surface
//     form with a nearly identical embedding.
// Salient sentences are made mostly of one topic's words; filler sentences
// only of filler words. Expert summaries are drawn from salient sentences,
// so a phrase scorer can learn what summary-like content looks like.
//
// Retrieval corpora plant noticed candidates around the query's topic. A
// "literal" noticed candidate copies fragments of the query summary; a
// "paraphrased" one carries the same fragments with every topic word
// replaced by its synonym, so it is only recognizable through embeddings.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "lcr/corpus.hpp"
#include "lcr/phrase_scorer.hpp"
#include "lcr/porter.hpp"
#include "lcr/random.hpp"
#include "lcr/text.hpp"

namespace lcr::synthetic {

using Words = std::vector<std::string>;

struct WorldSpec {
  std::size_t embedding_dim = 32;
  std::size_t topics = 60;
  std::size_t words_per_topic = 24;
  std::size_t filler_words = 400;
  double salient_strength = 1.5;
  double topic_spread = 1.0;
  double word_noise = 0.35;
  double synonym_noise = 0.05;
  std::uint64_t seed = 7;
};

class World {
 public:
  explicit World(const WorldSpec& spec) : spec_(spec) {
    Rng rng(spec.seed);
    const std::size_t d = spec.embedding_dim;
    auto table = std::make_shared<EmbeddingTable>(d);

    auto random_dir = [&](double norm) {
      std::vector<double> v(d);
      double n2 = 0;
      for (auto& x : v) {
        x = normal(rng);
        n2 += x * x;
      }
      for (auto& x : v) x *= norm / std::sqrt(n2);
      return v;
    };
    auto emit = [&](const std::string& w, const std::vector<double>& base, double noise) {
      std::vector<float> e(d);
      for (std::size_t i = 0; i < d; ++i) e[i] = static_cast<float>(base[i] + noise * normal(rng) / std::sqrt(double(d)));
      table->add(w, e);
      return e;
    };

    const auto salient = random_dir(spec.salient_strength);
    const auto filler = random_dir(spec.salient_strength);
    for (std::size_t i = 0; i < spec.filler_words; ++i) {
      std::string w = fresh_word(rng);
      emit(w, filler, spec.word_noise * 2.0);
      filler_.push_back(w);
    }
    topics_.resize(spec.topics);
    for (std::size_t t = 0; t < spec.topics; ++t) {
      auto center = random_dir(spec.topic_spread);
      for (std::size_t k = 0; k < d; ++k) center[k] += salient[k];
      for (std::size_t i = 0; i < spec.words_per_topic; ++i) {
        std::string w = fresh_word(rng);
        std::string syn = fresh_word(rng);
        auto e = emit(w, center, spec.word_noise);
        std::vector<double> base(e.begin(), e.end());
        emit(syn, base, spec.synonym_noise);
        topics_[t].push_back(w);
        synonym_[w] = syn;
      }
    }
    embeddings_ = std::move(table);
  }

  const WorldSpec& spec() const { return spec_; }
  std::shared_ptr<const EmbeddingTable> embeddings() const { return embeddings_; }
  const Words& filler() const { return filler_; }
  const Words& topic_words(std::size_t t) const { return topics_.at(t); }
  std::size_t topic_count() const { return topics_.size(); }
  const std::string& synonym(const std::string& w) const { return synonym_.at(w); }
  bool is_topic_word(const std::string& w) const { return synonym_.count(w) != 0; }

  Words filler_sentence(Rng& rng, std::size_t len) const {
    Words s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(filler_[uniform_index(rng, filler_.size())]);
    return s;
  }

  /// Mostly topic words, with roughly one filler word in five.
  Words salient_sentence(Rng& rng, std::size_t topic, std::size_t len) const {
    Words s;
    const Words& tw = topics_.at(topic);
    for (std::size_t i = 0; i < len; ++i) {
      if (uniform_unit(rng) < 0.2) s.push_back(filler_[uniform_index(rng, filler_.size())]);
      else s.push_back(tw[uniform_index(rng, tw.size())]);
    }
    return s;
  }

  /// Replaces each topic word by its synonym with probability `rate`.
  Words paraphrase(const Words& s, Rng& rng, double rate) const {
    Words out;
    for (const auto& w : s) out.push_back(is_topic_word(w) && uniform_unit(rng) < rate ? synonym_.at(w) : w);
    return out;
  }

  /// Writes the embedding table in the text format (word order is stable).
  void write_embeddings(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    auto line = [&](const std::string& w) {
      out << w;
      char buf[32];
      for (float v : embeddings_->lookup(w)) {
        std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(v));
        out << buf;
      }
      out << '\n';
    };
    for (const auto& w : filler_) line(w);
    for (const auto& t : topics_)
      for (const auto& w : t) {
        line(w);
        line(synonym_.at(w));
      }
  }

 private:
  std::string fresh_word(Rng& rng) {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    while (true) {
      std::string w;
      std::size_t syllables = 2 + uniform_index(rng, 2);
      for (std::size_t i = 0; i < syllables; ++i) {
        w += consonants[uniform_index(rng, consonants.size())];
        w += vowels[uniform_index(rng, vowels.size())];
      }
      if (is_stopword(w) || detail::is_abbreviation(w)) continue;
      std::string st = porter::stem(w);
      if (!stems_.insert(st).second) continue;
      return w;
    }
  }

  WorldSpec spec_;
  std::shared_ptr<const EmbeddingTable> embeddings_;
  Words filler_;
  std::vector<Words> topics_;
  std::unordered_map<std::string, std::string> synonym_;
  std::set<std::string> stems_;
};

// ---------------------------------------------------------------------------
// Rendering to raw case text

inline std::string render_sentence(const Words& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ' ';
    s += w[i];
  }
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  s += '.';
  return s;
}

struct DraftDocument {
  std::vector<Words> summary;                 // empty: unedited document
  std::vector<std::vector<Words>> paragraphs;
};

inline std::string render(const DraftDocument& doc) {
  std::string out;
  if (doc.summary.empty()) {
    out += std::string(kUneditedMarker) + ".\n\n";
  } else {
    out += "Summary:";
    for (const auto& s : doc.summary) out += ' ' + render_sentence(s);
    out += "\nPresent: Synthetic J.\n\n";
  }
  for (std::size_t p = 0; p < doc.paragraphs.size(); ++p) {
    if (p) out += "\n\n";
    for (std::size_t i = 0; i < doc.paragraphs[p].size(); ++i) {
      if (i) out += ' ';
      out += render_sentence(doc.paragraphs[p][i]);
    }
  }
  out += '\n';
  return out;
}

inline std::vector<std::vector<Words>> split_paragraphs(const std::vector<Words>& sentences, std::size_t per_paragraph) {
  std::vector<std::vector<Words>> out;
  for (std::size_t i = 0; i < sentences.size(); i += per_paragraph)
    out.emplace_back(sentences.begin() + static_cast<std::ptrdiff_t>(i),
                     sentences.begin() + static_cast<std::ptrdiff_t>(std::min(sentences.size(), i + per_paragraph)));
  return out;
}

// ---------------------------------------------------------------------------
// Summarized training documents

struct SummarizedSpec {
  std::size_t documents = 60;
  std::size_t sentences = 20;
  std::size_t salient_sentences = 5;
  std::size_t summary_sentences = 3;
  std::size_t min_len = 8;
  std::size_t max_len = 14;
  std::size_t per_paragraph = 4;
  double paraphrase_rate = 0.3;
  std::uint64_t seed = 11;
};

/// Raw texts (with "Summary:" blocks) and their ids.
inline std::vector<std::pair<std::string, std::string>> summarized_documents(const World& world, const SummarizedSpec& spec) {
  Rng rng(spec.seed);
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t n = 0; n < spec.documents; ++n) {
    const std::size_t topic = uniform_index(rng, world.topic_count());
    auto length = [&] { return spec.min_len + uniform_index(rng, spec.max_len - spec.min_len + 1); };
    auto salient_slots = sample_without_replacement(rng, spec.sentences, spec.salient_sentences);
    std::set<std::size_t> salient(salient_slots.begin(), salient_slots.end());
    std::vector<Words> body;
    std::vector<Words> salient_bodies;
    for (std::size_t i = 0; i < spec.sentences; ++i) {
      if (salient.count(i)) {
        body.push_back(world.salient_sentence(rng, topic, length()));
        salient_bodies.push_back(body.back());
      } else {
        body.push_back(world.filler_sentence(rng, length()));
      }
    }
    DraftDocument doc;
    for (std::size_t pick : sample_without_replacement(rng, salient_bodies.size(), spec.summary_sentences)) {
      Words s = world.paraphrase(salient_bodies[pick], rng, spec.paraphrase_rate);
      if (s.size() > spec.min_len && uniform_unit(rng) < spec.paraphrase_rate)
        s.erase(s.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, s.size())));
      doc.summary.push_back(std::move(s));
    }
    doc.paragraphs = split_paragraphs(body, spec.per_paragraph);
    char id[32];
    std::snprintf(id, sizeof id, "doc%03zu", n);
    out.emplace_back(id, render(doc));
  }
  return out;
}

inline std::vector<SummarizedDocument> to_training_documents(const std::vector<std::pair<std::string, std::string>>& raw) {
  std::vector<SummarizedDocument> out;
  for (const auto& [id, text] : raw) {
    CaseDocument doc = parse_case(text, id);
    if (!doc.summary) continue;
    out.push_back({doc.id, doc.body_sentences(), *doc.summary});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Retrieval corpora

struct RetrievalSpec {
  std::size_t queries = 40;
  std::size_t candidates = 50;
  std::size_t noticed = 5;
  std::size_t paraphrased_noticed = 2;
  std::size_t query_summary_sentences = 3;
  std::size_t query_sentences = 12;
  std::size_t query_salient = 5;
  std::size_t candidate_sentences = 12;
  std::size_t candidate_salient = 3;
  std::size_t fragment_min = 6;
  std::size_t fragment_max = 8;
  std::size_t min_len = 8;
  std::size_t max_len = 14;
  std::size_t per_paragraph = 4;
  std::uint64_t seed = 23;
};

struct RetrievalCorpus {
  struct Query {
    std::string id;
    std::string text;
    std::vector<std::pair<std::string, std::string>> candidates;  // (id, text)
    std::set<std::string> noticed;
  };
  std::vector<Query> queries;
};

inline RetrievalCorpus retrieval_corpus(const World& world, const RetrievalSpec& spec) {
  if (spec.queries > world.topic_count())
    throw Error(ErrorCode::InvalidConfig, "retrieval corpus needs one topic per query");
  Rng rng(spec.seed);
  RetrievalCorpus corpus;
  auto length = [&] { return spec.min_len + uniform_index(rng, spec.max_len - spec.min_len + 1); };
  auto place = [&](std::vector<Words> planted, std::size_t total, std::size_t per_paragraph) {
    std::vector<Words> body;
    auto slots = sample_without_replacement(rng, total, planted.size());
    std::set<std::size_t> slot_set(slots.begin(), slots.end());
    std::size_t next = 0;
    for (std::size_t i = 0; i < total; ++i)
      body.push_back(slot_set.count(i) ? planted[next++] : world.filler_sentence(rng, length()));
    return split_paragraphs(body, per_paragraph);
  };

  for (std::size_t q = 0; q < spec.queries; ++q) {
    RetrievalCorpus::Query query;
    char buf[32];
    std::snprintf(buf, sizeof buf, "q%03zu", q);
    query.id = buf;
    const std::size_t topic = q;

    DraftDocument qdoc;
    for (std::size_t i = 0; i < spec.query_summary_sentences; ++i) qdoc.summary.push_back(world.salient_sentence(rng, topic, length()));
    std::vector<Words> planted = qdoc.summary;
    for (std::size_t i = planted.size(); i < spec.query_salient; ++i) planted.push_back(world.salient_sentence(rng, topic, length()));
    qdoc.paragraphs = place(planted, spec.query_sentences, spec.per_paragraph);
    query.text = render(qdoc);

    auto noticed_slots = sample_without_replacement(rng, spec.candidates, spec.noticed);
    std::map<std::size_t, std::size_t> noticed_rank;  // slot -> order among noticed
    for (std::size_t i = 0; i < noticed_slots.size(); ++i) noticed_rank[noticed_slots[i]] = i;

    for (std::size_t c = 0; c < spec.candidates; ++c) {
      std::snprintf(buf, sizeof buf, "c%03zu", c);
      std::string cid = buf;
      DraftDocument cdoc;
      std::vector<Words> salient;
      auto it = noticed_rank.find(c);
      if (it != noticed_rank.end()) {
        const bool paraphrased = it->second < spec.paraphrased_noticed;
        for (std::size_t i = 0; i < spec.candidate_salient; ++i) {
          const Words& src = qdoc.summary[uniform_index(rng, qdoc.summary.size())];
          std::size_t frag = std::min(src.size(), spec.fragment_min + uniform_index(rng, spec.fragment_max - spec.fragment_min + 1));
          std::size_t start = uniform_index(rng, src.size() - frag + 1);
          Words s = world.salient_sentence(rng, topic, 2 + uniform_index(rng, 3));
          s.insert(s.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, s.size() + 1)),
                   src.begin() + static_cast<std::ptrdiff_t>(start),
                   src.begin() + static_cast<std::ptrdiff_t>(start + frag));
          salient.push_back(paraphrased ? world.paraphrase(s, rng, 1.0) : s);
        }
        query.noticed.insert(cid);
      } else {
        std::size_t other = uniform_index(rng, world.topic_count() - 1);
        if (other >= topic) ++other;
        for (std::size_t i = 0; i < spec.candidate_salient; ++i) salient.push_back(world.salient_sentence(rng, other, length()));
      }
      cdoc.paragraphs = place(salient, spec.candidate_sentences, spec.per_paragraph);
      query.candidates.emplace_back(cid, render(cdoc));
    }
    corpus.queries.push_back(std::move(query));
  }
  return corpus;
}

/// Materializes a retrieval corpus in the default on-disk layout.
inline void write_corpus(const RetrievalCorpus& corpus, const std::filesystem::path& root, const CorpusLayout& layout = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + p.string());
    out << text;
  };
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& q : corpus.queries) {
    fs::path qdir = root / q.id;
    fs::create_directories(qdir / layout.candidates_dir);
    write(qdir / layout.query_file, q.text);
    for (const auto& [cid, text] : q.candidates) write(qdir / layout.candidates_dir / (cid + layout.candidate_extension), text);
    labels[q.id] = std::vector<std::string>(q.noticed.begin(), q.noticed.end());
  }
  write(root / layout.labels_file, labels.dump(2) + "\n");
}

/// In-memory equivalent of load_corpus on a written corpus.
inline std::vector<QueryInstance> to_instances(const RetrievalCorpus& corpus) {
  std::vector<QueryInstance> out;
  for (const auto& q : corpus.queries) {
    QueryInstance inst;
    inst.query = parse_case(q.text, q.id);
    for (const auto& [cid, text] : q.candidates) inst.candidates.push_back(parse_case(text, cid));
    inst.noticed_ids = q.noticed;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace lcr::synthetic
