#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcr/ranker.hpp"
#include "test_util.hpp"

using lcr::ErrorCode;
using lcr::QueryFeatures;
using testutil::error_code_of;

namespace {

QueryFeatures query(std::string id, std::vector<std::vector<double>> rows, std::set<std::string> noticed) {
  QueryFeatures q;
  q.query_id = std::move(id);
  for (std::size_t i = 0; i < rows.size(); ++i) q.candidate_ids.push_back("c" + std::to_string(i));
  q.features = std::move(rows);
  q.noticed = std::move(noticed);
  return q;
}

// Positives carry +1 in dimension 0; everything else is noise.
std::vector<QueryFeatures> separable(std::size_t queries, std::size_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  std::vector<QueryFeatures> out;
  for (std::size_t qi = 0; qi < queries; ++qi) {
    std::vector<std::vector<double>> rows;
    std::set<std::string> noticed;
    for (std::size_t c = 0; c < 6; ++c) {
      std::vector<double> x(dims);
      for (std::size_t k = 1; k < dims; ++k) x[k] = n(rng);
      if (c < 2) {
        x[0] = 1.0;
        noticed.insert("c" + std::to_string(c));
      }
      rows.push_back(x);
    }
    out.push_back(query("q" + std::to_string(qi), rows, noticed));
  }
  return out;
}

lcr::RankerOptions hard_margin() {
  lcr::RankerOptions o;
  o.C = 1e6;
  o.epochs = 5000;
  o.tolerance = 1e-9;
  o.standardize = false;
  return o;
}

double margin(const lcr::RankModel& m, const lcr::PairSet& p, std::size_t i) {
  return lcr::score(m, p.rows[p.pairs[i].first]) - lcr::score(m, p.rows[p.pairs[i].second]);
}

}  // namespace

TEST(CombinedFeatures, WidthIsLexicalPlusThreeTimesFilters) {
  EXPECT_EQ(lcr::combined_dims(300), 1008u);
  EXPECT_EQ(lcr::combined_dims(4), 120u);
}

TEST(CombinedFeatures, InactiveBlocksAreExactlyZero) {
  lcr::LexicalFeatureVector lex;
  lex.fill(0.5);
  std::vector<double> rel(900, 0.25);
  auto full = lcr::combine_features(lex, rel, lcr::FeatureSubset::parse("ES+sp-ple"), 900);
  ASSERT_EQ(full.size(), 1008u);
  for (double v : full) EXPECT_NE(v, 0.0);
  auto lexical_only = lcr::combine_features(lex, {}, lcr::FeatureSubset::parse("s-e"), 900);
  ASSERT_EQ(lexical_only.size(), 1008u);
  for (std::size_t i = 0; i < 1008; ++i) EXPECT_EQ(lexical_only[i] != 0.0, i < 18) << i;
  EXPECT_EQ(error_code_of([&] { lcr::combine_features(lex, {1.0}, lcr::FeatureSubset::parse("ES+s-e"), 900); }),
            ErrorCode::LengthMismatch);
}

TEST(BuildPairs, CrossProductPerQuery) {
  auto q = query("q", {{1}, {2}, {3}, {4}, {5}}, {"c0", "c1"});
  auto p = lcr::build_pairs({q});
  EXPECT_EQ(p.pairs.size(), 6u);
  EXPECT_EQ(p.skipped_queries, 0u);
}

TEST(BuildPairs, DegenerateQueriesAreSkipped) {
  auto none = query("a", {{1}, {2}}, {});
  auto all = query("b", {{1}, {2}}, {"c0", "c1"});
  auto p = lcr::build_pairs({none, all});
  EXPECT_TRUE(p.pairs.empty());
  EXPECT_EQ(p.skipped_queries, 2u);
  EXPECT_EQ(error_code_of([&] { lcr::train_rank_svm(p, {}); }), ErrorCode::NoPairs);
}

TEST(BuildPairs, CapSamplesDeterministically) {
  auto q = query("q", {{1}, {2}, {3}, {4}, {5}}, {"c0", "c1"});
  auto a = lcr::build_pairs({q}, 2, 9), b = lcr::build_pairs({q}, 2, 9);
  EXPECT_EQ(a.pairs.size(), 2u);
  EXPECT_EQ(a.pairs, b.pairs);
  for (auto [pos, neg] : a.pairs) {
    EXPECT_LT(pos, 2u);
    EXPECT_GE(neg, 2u);
  }
}

TEST(TrainRankSvm, SeparableFixtureRanksPositivesFirstWithMargin) {
  auto data = separable(8, 5, 1);
  auto pairs = lcr::build_pairs(data);
  auto model = lcr::train_rank_svm(pairs, hard_margin());
  for (float w : model.weights) EXPECT_TRUE(std::isfinite(w));
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) EXPECT_GE(margin(model, pairs, i), 1.0 - 0.05) << "pair " << i;
}

TEST(TrainRankSvm, StandardizedModelAlsoSeparates) {
  auto data = separable(8, 5, 2);
  auto pairs = lcr::build_pairs(data);
  lcr::RankerOptions o;
  auto model = lcr::train_rank_svm(pairs, o);
  EXPECT_TRUE(model.standardized);
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) EXPECT_GT(margin(model, pairs, i), 0.0);
}

TEST(TrainRankSvm, ZeroCKeepsZeroWeights) {
  auto pairs = lcr::build_pairs(separable(3, 4, 3));
  lcr::RankerOptions o;
  o.C = 0.0;
  auto model = lcr::train_rank_svm(pairs, o);
  for (float w : model.weights) EXPECT_EQ(w, 0.0f);
}

TEST(TrainRankSvm, DuplicatedPairsKeepTheHardMarginDirection) {
  auto pairs = lcr::build_pairs(separable(6, 4, 4));
  auto doubled = pairs;
  doubled.pairs.insert(doubled.pairs.end(), pairs.pairs.begin(), pairs.pairs.end());
  auto a = lcr::train_rank_svm(pairs, hard_margin());
  auto b = lcr::train_rank_svm(doubled, hard_margin());
  double na = 0, nb = 0, dot = 0;
  for (std::size_t k = 0; k < a.dims(); ++k) {
    na += double(a.weights[k]) * a.weights[k];
    nb += double(b.weights[k]) * b.weights[k];
    dot += double(a.weights[k]) * b.weights[k];
  }
  EXPECT_NEAR(dot / std::sqrt(na * nb), 1.0, 1e-6);
}

TEST(TrainRankSvm, FixedSeedGivesIdenticalModel) {
  auto pairs = lcr::build_pairs(separable(6, 4, 5));
  lcr::RankerOptions o;
  o.epochs = 7;
  EXPECT_EQ(lcr::train_rank_svm(pairs, o), lcr::train_rank_svm(pairs, o));
}

TEST(Score, HandDotProducts) {
  auto m = lcr::RankModel::zeros(3);
  m.weights = {0.5f, -2.0f, 1.0f};
  EXPECT_EQ(lcr::score(m, {2, 1, 3}), 0.5 * 2 - 2 * 1 + 3);
  EXPECT_EQ(error_code_of([&] { lcr::score(m, {1, 2}); }), ErrorCode::LengthMismatch);
}

TEST(RankCandidates, ZeroWeightsOrderById) {
  auto q = query("q", {{3}, {1}, {2}}, {});
  q.candidate_ids = {"b", "c", "a"};
  auto ranked = lcr::rank_candidates(lcr::RankModel::zeros(1), q);
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].candidate_id, "a");
  EXPECT_EQ(ranked[2].candidate_id, "c");
}

TEST(RankCandidates, OneHotWeightOrdersByThatFeature) {
  auto q = query("q", {{0, 3}, {9, 1}, {5, 2}}, {});
  auto m = lcr::RankModel::zeros(2);
  m.weights = {0, 1};
  auto ranked = lcr::rank_candidates(m, q);
  EXPECT_EQ(ranked[0].candidate_id, "c0");
  EXPECT_EQ(ranked[1].candidate_id, "c2");
  EXPECT_EQ(ranked[2].candidate_id, "c1");
}

TEST(RankCandidates, OrderIsInvariantUnderPositiveWeightScaling) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  std::vector<std::vector<double>> rows(20, std::vector<double>(4));
  for (auto& r : rows)
    for (auto& x : r) x = n(rng);
  auto q = query("q", rows, {});
  auto m = lcr::RankModel::zeros(4);
  m.weights = {0.5f, -1.0f, 0.25f, 2.0f};
  auto scaled = m;
  for (auto& w : scaled.weights) w *= 8.0f;
  auto a = lcr::rank_candidates(m, q), b = lcr::rank_candidates(scaled, q);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].candidate_id, b[i].candidate_id);
}

TEST(RankCandidates, ListIsStrictlySortedWithUniqueIds) {
  auto q = query("q", {{1}, {1}, {2}, {0}, {2}}, {});
  auto ranked = lcr::rank_candidates([] {
    auto m = lcr::RankModel::zeros(1);
    m.weights = {1};
    return m;
  }(), q);
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    const auto& a = ranked[i - 1];
    const auto& b = ranked[i];
    EXPECT_TRUE(a.score > b.score || (a.score == b.score && a.candidate_id < b.candidate_id));
  }
}

TEST(SelectTopK, Examples) {
  lcr::RankedList r{{"x", 3}, {"y", 2}, {"z", 1}};
  EXPECT_EQ(lcr::select_top_k(r, 1), (std::set<std::string>{"x"}));
  EXPECT_EQ(lcr::select_top_k(r), (std::set<std::string>{"x", "y", "z"}));
  EXPECT_EQ(error_code_of([&] { lcr::select_top_k(r, 0); }), ErrorCode::InvalidConfig);
  for (std::size_t k = 1; k < 4; ++k) {
    auto small = lcr::select_top_k(r, k), big = lcr::select_top_k(r, k + 1);
    EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
  }
}

TEST(RankerFile, RoundTripsBitExactly) {
  auto pairs = lcr::build_pairs(separable(4, 1008, 7));
  lcr::RankerOptions o;
  o.epochs = 3;
  auto m = lcr::train_rank_svm(pairs, o);
  auto bytes = lcr::serialize(m);
  auto back = lcr::deserialize_rank_model(bytes);
  EXPECT_EQ(back, m);
  EXPECT_EQ(lcr::serialize(back), bytes);

  testutil::TempDir dir;
  lcr::save_rank_model(m, dir / "r.esrk");
  EXPECT_EQ(lcr::load_rank_model(dir / "r.esrk"), m);
  EXPECT_EQ(error_code_of([&] { lcr::load_rank_model(dir / "none.esrk"); }), ErrorCode::MissingArtifact);
  bytes[1] = 'Z';
  EXPECT_EQ(error_code_of([&] { lcr::deserialize_rank_model(bytes); }), ErrorCode::BadMagic);
}
