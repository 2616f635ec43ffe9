#pragma once

// Ranking metrics and the leave-one-out validation harness.
//
// Conventions: reciprocal rank is 0 when no relevant item is retrieved;
// average precision divides by the total number of relevant items, so
// relevant items missing from the list contribute 0. Precision, recall and
// F1 are computed per query on the top-k set and then averaged over queries
// (macro average).

#include <algorithm>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcr/error.hpp"
#include "lcr/ranker.hpp"

namespace lcr {

inline double reciprocal_rank(const RankedList& ranked, const std::set<std::string>& relevant) {
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (relevant.count(ranked[i].candidate_id)) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

inline double average_precision(const RankedList& ranked, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::NoRelevant, "average precision needs at least one relevant item");
  // Extended precision so simple fractions round to the nearest double.
  long double sum = 0.0L;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!relevant.count(ranked[i].candidate_id)) continue;
    ++hits;
    sum += static_cast<long double>(hits) / static_cast<long double>(i + 1);
  }
  return static_cast<double>(sum / static_cast<long double>(relevant.size()));
}

struct PrfScores {
  double precision = 0, recall = 0, f1 = 0;
  friend bool operator==(const PrfScores&, const PrfScores&) = default;
};

inline PrfScores prf_at_k(const std::set<std::string>& predicted, const std::set<std::string>& relevant) {
  std::size_t both = 0;
  for (const auto& id : predicted) both += relevant.count(id);
  PrfScores s;
  if (!predicted.empty()) s.precision = static_cast<double>(both) / static_cast<double>(predicted.size());
  if (!relevant.empty()) s.recall = static_cast<double>(both) / static_cast<double>(relevant.size());
  if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

struct QueryResult {
  std::string query_id;
  RankedList ranked;
  std::set<std::string> relevant;
  std::set<std::string> predicted;
};

struct QueryMetrics {
  std::string query_id;
  double rr = 0, ap = 0;
  PrfScores prf;
};

struct EvalReport {
  double mrr = 0, map = 0, precision = 0, recall = 0, f1 = 0;
  std::vector<QueryMetrics> per_query;
};

inline EvalReport evaluate(const std::vector<QueryResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "nothing to evaluate");
  EvalReport r;
  for (const auto& q : results) {
    QueryMetrics m;
    m.query_id = q.query_id;
    m.rr = reciprocal_rank(q.ranked, q.relevant);
    m.ap = average_precision(q.ranked, q.relevant);
    m.prf = prf_at_k(q.predicted, q.relevant);
    r.per_query.push_back(std::move(m));
  }
  // Sum in query-id order so the aggregates do not depend on input order.
  std::vector<const QueryMetrics*> order;
  for (const auto& m : r.per_query) order.push_back(&m);
  std::stable_sort(order.begin(), order.end(),
                   [](const QueryMetrics* a, const QueryMetrics* b) { return a->query_id < b->query_id; });
  for (const QueryMetrics* m : order) {
    r.mrr += m->rr;
    r.map += m->ap;
    r.precision += m->prf.precision;
    r.recall += m->prf.recall;
    r.f1 += m->prf.f1;
  }
  const double n = static_cast<double>(results.size());
  r.mrr /= n;
  r.map /= n;
  r.precision /= n;
  r.recall /= n;
  r.f1 /= n;
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& q : r.per_query)
    per.push_back({{"query_id", q.query_id},
                   {"rr", q.rr},
                   {"ap", q.ap},
                   {"precision", q.prf.precision},
                   {"recall", q.prf.recall},
                   {"f1", q.prf.f1}});
  return {{"mrr", r.mrr},
          {"map", r.map},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"averaging", "per-query macro"},
          {"per_query", per}};
}

/// Table rows in the `Model | MRR | MAP | Prec | Rec | F1` layout.
inline std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::string out = "Model\tMRR\tMAP\tPrec\tRec\tF1\n";
  char buf[128];
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "\t%.3f\t%.3f\t%.3f\t%.3f\t%.3f\n", r.mrr, r.map, r.precision, r.recall, r.f1);
    out += name;
    out += buf;
  }
  return out;
}

struct LooOutcome {
  EvalReport report;
  std::vector<QueryResult> results;
  std::size_t skipped_unlabeled = 0;  // held-out queries without noticed cases
};

/// For each query: train the ranker on every other query, rank and predict
/// the held-out one. Held-out queries without noticed candidates cannot be
/// scored and are counted in `skipped_unlabeled`.
inline LooOutcome leave_one_out(const std::vector<QueryFeatures>& queries, const RankerOptions& options,
                                std::size_t k = kDefaultTopK) {
  if (queries.size() < 2) throw Error(ErrorCode::TooFewQueries, "leave-one-out needs at least 2 queries");
  LooOutcome out;
  for (std::size_t held = 0; held < queries.size(); ++held) {
    const QueryFeatures& test = queries[held];
    if (test.noticed.empty()) {
      ++out.skipped_unlabeled;
      continue;
    }
    std::vector<QueryFeatures> train;
    train.reserve(queries.size() - 1);
    for (std::size_t i = 0; i < queries.size(); ++i)
      if (i != held) train.push_back(queries[i]);
    PairSet pairs = build_pairs(train, options.cap_per_query, options.seed);
    RankModel model = train_rank_svm(pairs, options);
    QueryResult r;
    r.query_id = test.query_id;
    r.ranked = rank_candidates(model, test);
    r.relevant = test.noticed;
    r.predicted = select_top_k(r.ranked, k);
    out.results.push_back(std::move(r));
  }
  out.report = evaluate(out.results);
  return out;
}

}  // namespace lcr
