#pragma once

// Pairwise linear ranking SVM.
//
// Training minimizes  1/2 |w|^2 + C * sum_i max(0, 1 - w . (x_pos_i - x_neg_i))
// over (noticed, non-noticed) candidate pairs of the same query. The bias
// cancels in pairwise differences and is fixed at 0. The solver is dual
// coordinate descent on the box-constrained dual (0 <= alpha_i <= C,
// w = sum alpha_i z_i), sweeping the pairs in a seeded shuffled order each
// epoch until the projected-gradient spread drops below `tolerance`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lcr/binary_io.hpp"
#include "lcr/error.hpp"
#include "lcr/lexmatch.hpp"
#include "lcr/random.hpp"

namespace lcr {

/// Width of the combined vector: 108 lexical dims followed by 3c relevance dims.
constexpr std::size_t combined_dims(std::size_t filters) { return kLexicalDims + 3 * filters; }

/// Lexical block then relevance block; blocks/options outside `subset` are
/// exactly zero. `relevance` may be empty when the subset excludes it.
inline std::vector<double> combine_features(const LexicalFeatureVector& lexical, const std::vector<double>& relevance,
                                            const FeatureSubset& subset, std::size_t relevance_dims) {
  std::vector<double> out(kLexicalDims + relevance_dims, 0.0);
  for (std::size_t option = 0; option < kOptionCount; ++option) {
    if (!subset.option_active(option)) continue;
    for (std::size_t i = option * kOptionWidth; i < (option + 1) * kOptionWidth; ++i) out[i] = lexical[i];
  }
  if (subset.relevance) {
    if (relevance.size() != relevance_dims)
      throw Error(ErrorCode::LengthMismatch, "relevance vector has " + std::to_string(relevance.size()) +
                                                 " dims, expected " + std::to_string(relevance_dims));
    std::copy(relevance.begin(), relevance.end(), out.begin() + static_cast<std::ptrdiff_t>(kLexicalDims));
  }
  return out;
}

namespace detail {

// Four independent partial sums; fixed evaluation order keeps results
// reproducible.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

/// Per-query candidate features with gold labels.
struct QueryFeatures {
  std::string query_id;
  std::vector<std::string> candidate_ids;
  std::vector<std::vector<double>> features;  // aligned with candidate_ids
  std::set<std::string> noticed;
};

struct PairSet {
  std::vector<std::vector<double>> rows;                   // feature vectors
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (positive row, negative row)
  std::size_t skipped_queries = 0;                         // no positives or no negatives
};

/// All (noticed, non-noticed) pairs per query; with `cap_per_query > 0` a
/// seeded uniform sample of at most that many pairs per query. Queries
/// without positives or without negatives are skipped and counted.
inline PairSet build_pairs(const std::vector<QueryFeatures>& queries, std::size_t cap_per_query = 0,
                           std::uint64_t seed = 1) {
  PairSet out;
  Rng rng(seed);
  for (const auto& q : queries) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < q.candidate_ids.size(); ++i) {
      std::size_t row = out.rows.size();
      out.rows.push_back(q.features.at(i));
      (q.noticed.count(q.candidate_ids[i]) ? pos : neg).push_back(row);
    }
    if (pos.empty() || neg.empty()) {
      ++out.skipped_queries;
      continue;
    }
    const std::size_t total = pos.size() * neg.size();
    if (cap_per_query == 0 || cap_per_query >= total) {
      for (std::size_t p : pos)
        for (std::size_t n : neg) out.pairs.emplace_back(p, n);
    } else {
      auto picks = sample_without_replacement(rng, total, cap_per_query);
      std::sort(picks.begin(), picks.end());
      for (std::size_t k : picks) out.pairs.emplace_back(pos[k / neg.size()], neg[k % neg.size()]);
    }
  }
  return out;
}

struct RankerOptions {
  double C = 1.0;
  std::size_t epochs = 100;
  std::uint64_t seed = 1;
  bool standardize = true;
  double tolerance = 1e-6;
  std::size_t cap_per_query = 0;

  friend bool operator==(const RankerOptions&, const RankerOptions&) = default;
};

struct RankModel {
  std::vector<float> weights;
  float bias = 0.0f;
  // Per-dimension z-scoring fitted on the training rows; identity when off.
  std::vector<float> mean;
  std::vector<float> scale;
  bool standardized = false;
  double C = 1.0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;

  std::size_t dims() const { return weights.size(); }

  static RankModel zeros(std::size_t dims) {
    RankModel m;
    m.weights.assign(dims, 0.0f);
    m.mean.assign(dims, 0.0f);
    m.scale.assign(dims, 1.0f);
    return m;
  }

  std::vector<double> transform(const std::vector<double>& x) const {
    if (x.size() != weights.size())
      throw Error(ErrorCode::LengthMismatch, "feature vector has " + std::to_string(x.size()) + " dims, model expects " +
                                                 std::to_string(weights.size()));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = (x[i] - static_cast<double>(mean[i])) / static_cast<double>(scale[i]);
    return out;
  }

  friend bool operator==(const RankModel&, const RankModel&) = default;
};

/// Fits per-dimension mean and population stddev; constant dimensions get
/// scale 1 so all-zero (masked) dimensions stay exactly zero.
inline void fit_standardizer(const std::vector<std::vector<double>>& rows, RankModel& model) {
  const std::size_t d = model.dims();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) mean[i] += r[i];
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) var[i] += (r[i] - mean[i]) * (r[i] - mean[i]);
  for (std::size_t i = 0; i < d; ++i) {
    double sd = std::sqrt(var[i] / static_cast<double>(rows.size()));
    model.mean[i] = static_cast<float>(mean[i]);
    model.scale[i] = sd > 1e-12 ? static_cast<float>(sd) : 1.0f;
  }
  model.standardized = true;
}

inline RankModel train_rank_svm(const PairSet& data, const RankerOptions& opt) {
  if (data.pairs.empty()) throw Error(ErrorCode::NoPairs, "no training pairs");
  if (!(opt.C >= 0)) throw Error(ErrorCode::InvalidConfig, "C must be non-negative");
  const std::size_t dims = data.rows.front().size();
  for (const auto& r : data.rows)
    if (r.size() != dims) throw Error(ErrorCode::LengthMismatch, "ragged feature rows");

  RankModel model = RankModel::zeros(dims);
  model.C = opt.C;
  model.epochs = opt.epochs;
  model.seed = opt.seed;
  if (opt.standardize) fit_standardizer(data.rows, model);

  std::vector<std::vector<double>> rows;
  rows.reserve(data.rows.size());
  for (const auto& r : data.rows) rows.push_back(model.transform(r));

  const std::size_t n = data.pairs.size();
  std::vector<std::vector<double>> z(n, std::vector<double>(dims));
  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = rows[data.pairs[i].first];
    const auto& q = rows[data.pairs[i].second];
    for (std::size_t k = 0; k < dims; ++k) z[i][k] = p[k] - q[k];
    qii[i] = detail::dot(z[i].data(), z[i].data(), dims);
  }

  std::vector<double> w(dims, 0.0), alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(opt.seed);
  for (std::size_t epoch = 0; epoch < opt.epochs && opt.C > 0; ++epoch) {
    shuffle(order, rng);
    double pg_max = -1e300, pg_min = 1e300;
    for (std::size_t i : order) {
      if (qii[i] <= 0) continue;
      const double g = detail::dot(w.data(), z[i].data(), dims) - 1.0;
      double pg = g;
      if (alpha[i] <= 0) pg = std::min(g, 0.0);
      else if (alpha[i] >= opt.C) pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg == 0.0) continue;
      const double updated = std::clamp(alpha[i] - g / qii[i], 0.0, opt.C);
      const double delta = updated - alpha[i];
      if (delta == 0.0) continue;
      alpha[i] = updated;
      for (std::size_t k = 0; k < dims; ++k) w[k] += delta * z[i][k];
    }
    if (pg_max - pg_min < opt.tolerance) break;
  }
  for (std::size_t k = 0; k < dims; ++k) model.weights[k] = static_cast<float>(w[k]);
  return model;
}

inline double score(const RankModel& model, const std::vector<double>& features) {
  std::vector<double> x = model.transform(features);
  double s = static_cast<double>(model.bias);
  for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(model.weights[i]) * x[i];
  return s;
}

struct RankedEntry {
  std::string candidate_id;
  double score = 0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Descending score; equal scores ordered by candidate id ascending.
using RankedList = std::vector<RankedEntry>;

inline void sort_ranked(RankedList& list) {
  std::sort(list.begin(), list.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.candidate_id < b.candidate_id;
  });
}

inline RankedList rank_candidates(const RankModel& model, const QueryFeatures& query) {
  RankedList list;
  for (std::size_t i = 0; i < query.candidate_ids.size(); ++i)
    list.push_back({query.candidate_ids[i], score(model, query.features.at(i))});
  sort_ranked(list);
  return list;
}

inline constexpr std::size_t kDefaultTopK = 5;

inline std::set<std::string> select_top_k(const RankedList& ranked, std::size_t k = kDefaultTopK) {
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  std::set<std::string> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.insert(ranked[i].candidate_id);
  return out;
}

// ---------------------------------------------------------------------------
// "ESRK" envelope, version 1:
//   u32 dims; u32 standardized; f64 C; u32 epochs; u64 seed;
//   f32 weights[dims]; f32 bias; f32 mean[dims]; f32 scale[dims]

inline constexpr std::string_view kRankerMagic = "ESRK";
inline constexpr std::uint32_t kRankerFormatVersion = 1;

inline std::vector<char> serialize(const RankModel& m) {
  io::Writer w(kRankerMagic, kRankerFormatVersion);
  w.u32(static_cast<std::uint32_t>(m.dims()));
  w.u32(m.standardized ? 1u : 0u);
  w.f64(m.C);
  w.u32(static_cast<std::uint32_t>(m.epochs));
  w.u64(m.seed);
  w.f32s(m.weights);
  w.f32(m.bias);
  w.f32s(m.mean);
  w.f32s(m.scale);
  return w.bytes();
}

inline RankModel deserialize_rank_model(std::vector<char> bytes, std::string origin = "<memory>") {
  io::Reader r(std::move(bytes), kRankerMagic, kRankerFormatVersion, std::move(origin));
  RankModel m;
  const std::size_t dims = r.u32();
  m.standardized = r.u32() != 0;
  m.C = r.f64();
  m.epochs = r.u32();
  m.seed = r.u64();
  m.weights = r.f32s<float>(dims);
  m.bias = r.f32();
  m.mean = r.f32s<float>(dims);
  m.scale = r.f32s<float>(dims);
  r.expect_end();
  return m;
}

inline void save_rank_model(const RankModel& m, const std::filesystem::path& path) {
  auto bytes = serialize(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline RankModel load_rank_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifact, path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_rank_model(std::move(bytes), path.string());
}

}  // namespace lcr
