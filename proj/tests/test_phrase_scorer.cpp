#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcr/phrase_scorer.hpp"
#include "lcr/synthetic.hpp"
#include "test_util.hpp"

using lcr::ErrorCode;
using lcr::Hyperparams;
using lcr::PhraseScorer;
using lcr::ScorerParams;
using testutil::error_code_of;

namespace {

std::shared_ptr<lcr::EmbeddingTable> table(std::size_t d, std::initializer_list<std::pair<std::string, std::vector<float>>> entries) {
  auto t = std::make_shared<lcr::EmbeddingTable>(d);
  for (const auto& [w, v] : entries) t->add(w, v);
  return t;
}

Hyperparams tiny(std::size_t d, std::size_t c, std::size_t l, std::size_t h) {
  Hyperparams hp;
  hp.embedding_dim = d;
  hp.filters = c;
  hp.window = l;
  hp.hidden = h;
  return hp;
}

std::vector<lcr::Sentence> sentences(const std::string& text) { return lcr::tokenize(text); }

// Random embeddings for the given words.
std::shared_ptr<lcr::EmbeddingTable> random_table(std::size_t d, const std::vector<std::string>& words, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  auto t = std::make_shared<lcr::EmbeddingTable>(d);
  for (const auto& w : words) {
    std::vector<float> v(d);
    for (auto& x : v) x = n(rng);
    t->add(w, v);
  }
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Embeddings

TEST(Embeddings, LoadsTwoLineFile) {
  testutil::TempDir dir;
  testutil::write(dir / "e.txt", "law 0.1 0.2 0.3\ncourt -1 0 2.5\n");
  auto t = lcr::load_embeddings(dir / "e.txt", 3);
  EXPECT_EQ(t.size(), 2u);
  auto v = t.lookup("court");
  EXPECT_EQ(std::vector<float>(v.begin(), v.end()), (std::vector<float>{-1.0f, 0.0f, 2.5f}));
}

TEST(Embeddings, UnknownTokenIsZeroVector) {
  auto t = table(3, {{"law", {1, 2, 3}}});
  auto v = t->lookup("unseen");
  EXPECT_EQ(std::vector<float>(v.begin(), v.end()), (std::vector<float>{0, 0, 0}));
  EXPECT_EQ(t->find("unseen"), nullptr);
  EXPECT_NE(t->find("Law"), nullptr);  // falls back to lowercase
}

TEST(Embeddings, WrongFieldCountIsMalformedLine) {
  testutil::TempDir dir;
  testutil::write(dir / "e.txt", "law 0.1 0.2 0.3\ncourt 1 2\n");
  try {
    lcr::load_embeddings(dir / "e.txt", 3);
    FAIL() << "expected MalformedLine";
  } catch (const lcr::Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Embeddings, NonNumericFieldIsMalformedLine) {
  testutil::TempDir dir;
  testutil::write(dir / "e.txt", "law 0.1 x 0.3\n");
  EXPECT_EQ(error_code_of([&] { lcr::load_embeddings(dir / "e.txt", 3); }), ErrorCode::MalformedLine);
}

// ---------------------------------------------------------------------------
// Forward pass

TEST(PhraseFeatures, ZeroKernelGivesZeros) {
  auto hp = tiny(2, 3, 2, 2);
  PhraseScorer<double> m(hp, table(2, {{"a", {1, 2}}, {"b", {3, 4}}}), ScorerParams<double>::zeros(hp));
  for (const auto& f : m.phrase_features(sentences("a b a.")[0]))
    for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(PhraseFeatures, SingleWeightHandArithmetic) {
  auto hp = tiny(1, 1, 1, 1);
  auto p = ScorerParams<double>::zeros(hp);
  p.conv = {2.0};
  PhraseScorer<double> m(hp, table(1, {{"t", {3}}}), p);
  EXPECT_EQ(m.phrase_features(sentences("t.")[0]), (std::vector<std::vector<double>>{{6.0}}));
  p.conv = {-2.0};
  PhraseScorer<double> neg(hp, table(1, {{"t", {3}}}), p);
  EXPECT_EQ(neg.phrase_features(sentences("t.")[0]), (std::vector<std::vector<double>>{{0.0}}));
}

TEST(PhraseFeatures, ShortSentencesArePaddedToOnePhrase) {
  auto hp = tiny(2, 2, 4, 2);
  PhraseScorer<double> m(hp, random_table(2, {"a", "b", "c"}, 1));
  EXPECT_EQ(m.phrase_features(sentences("a b.")[0]).size(), 1u);
  EXPECT_EQ(m.phrase_features(sentences("a b c a b c.")[0]).size(), 3u);
}

TEST(Pooling, HandExamples) {
  using V = std::vector<std::vector<double>>;
  EXPECT_EQ(lcr::sentence_feature(V{{1, 0}, {0, 2}}), (std::vector<double>{1, 2}));
  EXPECT_EQ(lcr::document_feature(V{{3, -1}}), (std::vector<double>{3, -1}));
  EXPECT_EQ(lcr::sentence_feature(V{{0, 0}, {0, 0}}), (std::vector<double>{0, 0}));
  EXPECT_EQ(error_code_of([] { lcr::sentence_feature(V{}); }), ErrorCode::EmptyInput);
}

TEST(ScoreDocument, ZeroWeightsScoreOneHalf) {
  auto hp = tiny(2, 2, 2, 2);
  PhraseScorer<double> m(hp, random_table(2, {"a", "b"}, 3), ScorerParams<double>::zeros(hp));
  auto s = m.score_document(sentences("a b a. b a."));
  for (double p : s.all_scores()) EXPECT_EQ(p, 0.5);
}

TEST(ScoreDocument, TinyModelHandForwardPass) {
  // d=2, c=2, l=1, h=2. x=[1,0], y=[0,1]; kernel rows [1,2] and [-1,1]
  // give f_p(x)=[1,0], f_p(y)=[2,1]; one sentence "x y" so f_s=f_d=[2,1].
  auto hp = tiny(2, 2, 1, 2);
  ScorerParams<double> p = ScorerParams<double>::zeros(hp);
  p.conv = {1, 2, -1, 1};
  p.w1 = {0.5, 0, 0, 0, 0, -0.5,  //
          0, 1, 0, 0, 0, 0};
  p.b1 = {0, -0.5};
  p.w2 = {1, -1};
  p.b2 = 0.1;
  PhraseScorer<double> m(hp, table(2, {{"x", {1, 0}}, {"y", {0, 1}}}), p);
  auto s = m.score_document(sentences("x y."));
  // Phrase x: hidden pre-activations [0.5*1 - 0.5*1, 0 - 0.5] = [0, -0.5];
  // output 1*tanh(0) - tanh(-0.5) + 0.1.
  // Phrase y: [0.5*2 - 0.5*1, 1 - 0.5] = [0.5, 0.5]; output tanh(.5) - tanh(.5) + 0.1.
  const double px = 1.0 / (1.0 + std::exp(-(std::tanh(0.5) + 0.1)));
  const double py = 1.0 / (1.0 + std::exp(-0.1));
  ASSERT_EQ(s.phrase_count(), 2u);
  EXPECT_NEAR(s.all_scores()[0], px, 1e-15);
  EXPECT_NEAR(s.all_scores()[1], py, 1e-15);
  EXPECT_EQ(s.document_feature, (std::vector<double>{2, 1}));
}

TEST(ScoreDocument, EmptyInputIsRejected) {
  auto hp = tiny(2, 2, 2, 2);
  PhraseScorer<double> m(hp, random_table(2, {"a"}, 3));
  EXPECT_EQ(error_code_of([&] { m.score_document({}); }), ErrorCode::EmptyInput);
}

TEST(ScoreDocument, PoolingDominanceAndScoreRange) {
  std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto hp = tiny(4, 5, 3, 4);
    hp.seed = seed;
    PhraseScorer<double> m(hp, random_table(4, vocab, seed));
    auto s = m.score_document(sentences("a b c d e f. b c. d e f a. f."));
    for (const auto& sent : s.sentences) {
      for (const auto& fp : sent.phrase_features)
        for (std::size_t k = 0; k < fp.size(); ++k) {
          EXPECT_GE(fp[k], 0.0);
          EXPECT_GE(sent.sentence_feature[k], fp[k]);
        }
      for (std::size_t k = 0; k < sent.sentence_feature.size(); ++k)
        EXPECT_GE(s.document_feature[k], sent.sentence_feature[k]);
      for (double p : sent.scores) {
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Loss

TEST(LossTerms, ConstantScores) {
  std::vector<double> s{0.5, 0.5, 0.5};
  auto t = lcr::loss_terms<double>(s, s, {}, {});
  EXPECT_EQ(t.e_c, 0.5);
  EXPECT_EQ(t.std_c, 0.0);
  EXPECT_TRUE(t.e_c_neg.empty());
}

TEST(LossTerms, PopulationStandardDeviation) {
  std::vector<double> s{0.2, 0.8};
  auto t = lcr::loss_terms<double>(s, s, {}, {});
  EXPECT_NEAR(t.e_s, 0.5, 1e-15);
  EXPECT_NEAR(t.std_s, 0.3, 1e-15);
}

TEST(LossTerms, EmptyScoresAreRejected) {
  std::vector<double> s{0.5}, none;
  EXPECT_EQ(error_code_of([&] { lcr::loss_terms<double>(none, s, {}, {}); }), ErrorCode::EmptyScores);
  EXPECT_EQ(error_code_of([&] { lcr::loss_terms<double>(s, none, {}, {}); }), ErrorCode::EmptyScores);
}

TEST(Loss, MarginMetGivesZero) {
  lcr::LossTerms t;
  t.e_c = 0.9;
  t.e_s = 0.1;
  EXPECT_EQ(lcr::loss(t, Hyperparams{}), 0.0);
}

TEST(Loss, EqualMeansNoNegativesGivesMargin) {
  lcr::LossTerms t;
  t.e_c = t.e_s = 0.4;
  EXPECT_EQ(lcr::loss(t, Hyperparams{}), 0.5);
}

TEST(Loss, PlugInFixture) {
  lcr::LossTerms t;
  t.e_c = 0.7;
  t.std_c = 0.1;
  t.e_s = 0.4;
  t.std_s = 0.1;
  t.e_s_neg = {0.5};
  t.e_c_neg = {0.3};
  // 1.0*(0.3) + 1.7*(0.2) + 0.3*(0.8 - 0.5) + 0.7*(0.6 - 0.4) = 0.3 + 0.34 + 0.09 + 0.14 = 0.87
  EXPECT_NEAR(lcr::constraint_combination(t, Hyperparams{}), 0.87, 1e-15);
  EXPECT_EQ(lcr::loss(t, Hyperparams{}), 0.0);
  Hyperparams wide;
  wide.margin = 1.0;
  EXPECT_NEAR(lcr::loss(t, wide), 0.13, 1e-15);
}

// ---------------------------------------------------------------------------
// Gradients

namespace {

struct GradientFixture {
  std::vector<lcr::Sentence> doc, summary, negative;
  lcr::TrainingItem item() const { return {&doc, &summary, {&negative}}; }
};

GradientFixture gradient_fixture() {
  return {sentences("a b c d. e f a. b b c d e."), sentences("a b c. d e."), sentences("f e d c. a f. c a b.")};
}

}  // namespace

TEST(Gradients, MatchCentralFiniteDifferences) {
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
  auto fx = gradient_fixture();
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto hp = tiny(8, 4, 2, 4);
    hp.margin = 10.0;  // keeps the hinge active
    hp.seed = seed;
    PhraseScorer<double> m(hp, random_table(8, vocab, 100 + seed));
    ScorerParams<double> grad;
    m.gradients({fx.item()}, grad);
    for (std::size_t i = 0; i < m.params().size(); ++i) {
      const double step = 1e-5, orig = m.params().at(i);
      m.params().at(i) = orig + step;
      const double up = m.item_loss(fx.item());
      m.params().at(i) = orig - step;
      const double down = m.item_loss(fx.item());
      m.params().at(i) = orig;
      const double numeric = (up - down) / (2 * step);
      const double analytic = grad.at(i);
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      EXPECT_LT(std::abs(numeric - analytic) / scale, 1e-4) << "seed " << seed << " coordinate " << i;
      ++checked;
    }
  }
  EXPECT_GE(checked, 500u);
}

TEST(Gradients, ZeroWhenMarginIsMet) {
  // "good" phrases score near 1 and "bad" ones near 0, so the summary beats
  // the document by more than the margin.
  auto hp = tiny(1, 1, 1, 1);
  ScorerParams<double> p = ScorerParams<double>::zeros(hp);
  p.conv = {1};
  p.w1 = {10, 0, 0};
  p.w2 = {10};
  p.b2 = -5;
  PhraseScorer<double> m(hp, table(1, {{"good", {1}}, {"bad", {-1}}}), p);
  auto doc = sentences("good bad bad bad."), summary = sentences("good.");
  lcr::TrainingItem item{&doc, &summary, {}};
  EXPECT_EQ(m.item_loss(item), 0.0);
  ScorerParams<double> grad;
  m.gradients({item}, grad);
  for (std::size_t i = 0; i < grad.size(); ++i) EXPECT_EQ(grad.at(i), 0.0);
}

TEST(Gradients, DuplicatedItemDoublesGradient) {
  auto fx = gradient_fixture();
  auto hp = tiny(8, 4, 2, 4);
  hp.margin = 10.0;
  PhraseScorer<double> m(hp, random_table(8, {"a", "b", "c", "d", "e", "f"}, 9));
  ScorerParams<double> once, twice;
  m.gradients({fx.item()}, once);
  m.gradients({fx.item(), fx.item()}, twice);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice.at(i), 2 * once.at(i), 1e-12 * (1 + std::abs(once.at(i))));
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct SmallWorld {
  lcr::synthetic::World world;
  std::vector<lcr::SummarizedDocument> docs;

  SmallWorld(std::size_t documents, std::size_t dim)
      : world([&] {
          lcr::synthetic::WorldSpec ws;
          ws.embedding_dim = dim;
          ws.topics = 12;
          ws.words_per_topic = 12;
          ws.filler_words = 80;
          return ws;
        }()) {
    lcr::synthetic::SummarizedSpec ss;
    ss.documents = documents;
    ss.sentences = 10;
    ss.salient_sentences = 3;
    ss.summary_sentences = 2;
    ss.paraphrase_rate = 0.0;  // summaries copied from document sentences
    docs = lcr::synthetic::to_training_documents(lcr::synthetic::summarized_documents(world, ss));
  }
};

Hyperparams small_hp() {
  auto hp = tiny(12, 6, 3, 6);
  hp.learning_rate = 3e-3;
  hp.epochs = 10;
  return hp;
}

}  // namespace

TEST(Training, LossDecreasesOverFirstTenEpochs) {
  SmallWorld w(40, 12);
  auto hp = small_hp();
  hp.learning_rate = 2e-3;
  hp.negatives = 4;
  std::vector<double> losses;
  lcr::train_phrase_scorer<double>(w.docs, hp, w.world.embeddings(),
                                   [&](const lcr::EpochLog& e) { losses.push_back(e.mean_loss); });
  ASSERT_EQ(losses.size(), 10u);
  for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LT(losses[i], losses[i - 1]) << "epoch " << i + 1;
}

TEST(Training, FixedSeedGivesIdenticalModels) {
  SmallWorld w(8, 12);
  auto hp = small_hp();
  hp.epochs = 3;
  auto a = lcr::serialize(lcr::train_phrase_scorer<float>(w.docs, hp, w.world.embeddings()));
  auto b = lcr::serialize(lcr::train_phrase_scorer<float>(w.docs, hp, w.world.embeddings()));
  EXPECT_EQ(a, b);
  hp.seed = 2;
  EXPECT_NE(a, lcr::serialize(lcr::train_phrase_scorer<float>(w.docs, hp, w.world.embeddings())));
}

TEST(Training, SingleDocumentWithoutNegatives) {
  SmallWorld w(1, 12);
  auto hp = small_hp();
  hp.negatives = 0;
  hp.epochs = 2;
  std::vector<double> losses;
  lcr::train_phrase_scorer<double>(w.docs, hp, w.world.embeddings(), [&](const lcr::EpochLog& e) { losses.push_back(e.mean_loss); });
  ASSERT_EQ(losses.size(), 2u);
  EXPECT_TRUE(std::isfinite(losses[0]));
}

TEST(Training, NeedsSummarizedDocuments) {
  auto hp = small_hp();
  EXPECT_EQ(error_code_of([&] { lcr::train_phrase_scorer<double>({}, hp, random_table(12, {"a"}, 1)); }),
            ErrorCode::NoSummarizedDocuments);
}

// ---------------------------------------------------------------------------
// Serialization

TEST(ScorerFile, DefaultShapedModelRoundTripsBitExactly) {
  Hyperparams hp;  // d=c=h=300, l=5
  PhraseScorer<float> m(hp, nullptr);
  auto bytes = lcr::serialize(m);
  auto back = lcr::deserialize_scorer<float>(bytes);
  EXPECT_EQ(back.hyper(), m.hyper());
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(lcr::serialize(back), bytes);
}

TEST(ScorerFile, SaveAndLoadThroughDisk) {
  testutil::TempDir dir;
  auto hp = tiny(4, 3, 2, 5);
  hp.learning_rate = 0.123456789;
  PhraseScorer<float> m(hp, nullptr);
  lcr::save_model(m, dir / "m.espm");
  auto back = lcr::load_model<float>(dir / "m.espm");
  EXPECT_EQ(back.hyper(), hp);
  EXPECT_EQ(back.params(), m.params());
}

TEST(ScorerFile, CorruptFilesAreDiagnosed) {
  auto bytes = lcr::serialize(PhraseScorer<float>(tiny(4, 3, 2, 5), nullptr));
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_EQ(error_code_of([&] { lcr::deserialize_scorer<float>(truncated); }), ErrorCode::ShapeMismatch);
  auto foreign = bytes;
  foreign[0] = 'X';
  EXPECT_EQ(error_code_of([&] { lcr::deserialize_scorer<float>(foreign); }), ErrorCode::BadMagic);
  auto version = bytes;
  version[4] = 9;
  EXPECT_EQ(error_code_of([&] { lcr::deserialize_scorer<float>(version); }), ErrorCode::VersionMismatch);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(error_code_of([&] { lcr::deserialize_scorer<float>(trailing); }), ErrorCode::ShapeMismatch);
}

TEST(ScorerFile, MissingFileIsMissingArtifact) {
  testutil::TempDir dir;
  EXPECT_EQ(error_code_of([&] { lcr::load_model<float>(dir / "none.espm"); }), ErrorCode::MissingArtifact);
}

TEST(ScorerFile, EmbeddingDimensionMustMatch) {
  auto bytes = lcr::serialize(PhraseScorer<float>(tiny(4, 3, 2, 5), nullptr));
  auto wrong = std::make_shared<lcr::EmbeddingTable>(5);
  EXPECT_EQ(error_code_of([&] { lcr::deserialize_scorer<float>(bytes, wrong); }), ErrorCode::ShapeMismatch);
}
