#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <iterator>
#include <random>
#include <utility>

#include "lcr/porter.hpp"
#include "lcr/text.hpp"

namespace {

std::vector<std::vector<std::string>> surfaces(const std::vector<lcr::Sentence>& sentences) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : sentences) {
    out.emplace_back();
    for (const auto& t : s.tokens) out.back().push_back(t.surface);
  }
  return out;
}

using Sents = std::vector<std::vector<std::string>>;

}  // namespace

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(lcr::tokenize("").empty()); }

TEST(Tokenize, TwoShortSentences) {
  EXPECT_EQ(surfaces(lcr::tokenize("A b. C d.")), (Sents{{"A", "b"}, {"C", "d"}}));
}

TEST(Tokenize, AbbreviationGuard) {
  EXPECT_EQ(surfaces(lcr::tokenize("U.S. law applies.")), (Sents{{"U.S", "law", "applies"}}));
  EXPECT_EQ(surfaces(lcr::tokenize("See Mr. Smith. He left.")), (Sents{{"See", "Mr", "Smith"}, {"He", "left"}}));
  EXPECT_EQ(surfaces(lcr::tokenize("Per J. Doe. Done.")), (Sents{{"Per", "J", "Doe"}, {"Done"}}));
}

TEST(Tokenize, JoinersStayInsideWords) {
  EXPECT_EQ(surfaces(lcr::tokenize("It's a well-known rule, worth 3.5 points!")),
            (Sents{{"It's", "a", "well-known", "rule", "worth", "3.5", "points"}}));
}

TEST(Tokenize, TerminatorsNeedABoundary) {
  // "x.y" is one token; "?!" ends one sentence; a closing quote counts as a boundary.
  EXPECT_EQ(surfaces(lcr::tokenize("Is it x.y?! \"Yes.\" Fine")), (Sents{{"Is", "it", "x.y"}, {"Yes"}, {"Fine"}}));
}

TEST(Tokenize, PunctuationOnlyProducesNothing) { EXPECT_TRUE(lcr::tokenize("... ; -- !!").empty()); }

TEST(Tokenize, Utf8BytesAreWordCharacters) {
  EXPECT_EQ(surfaces(lcr::tokenize("Caf\xC3\xA9 open.")), (Sents{{"Caf\xC3\xA9", "open"}}));
}

TEST(Tokenize, PreservesAlphanumericContent) {
  std::mt19937_64 rng(5);
  const std::string alphabet = "abcXYZ019 .,;!?'-()\n";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 60);
    for (std::size_t i = 0, n = len(rng); i < n; ++i) text += alphabet[pick(rng)];
    std::string expected, got;
    for (char ch : text)
      if (std::isalnum(static_cast<unsigned char>(ch))) expected += ch;
    for (const auto& s : lcr::tokenize(text))
      for (const auto& t : s.tokens)
        for (char ch : t.surface)
          if (std::isalnum(static_cast<unsigned char>(ch))) got += ch;
    EXPECT_EQ(got, expected) << text;
  }
}

TEST(Token, NormalizedIsLowercaseAndStopwordFlagFollowsList) {
  auto t = lcr::make_token("The");
  EXPECT_EQ(t.normalized, "the");
  EXPECT_TRUE(t.is_stopword);
  EXPECT_FALSE(lcr::make_token("Tenant").is_stopword);
}

TEST(Stopwords, ListIsSortedAndUnique) {
  EXPECT_TRUE(std::is_sorted(std::begin(lcr::kStopwords), std::end(lcr::kStopwords)));
  EXPECT_EQ(std::adjacent_find(std::begin(lcr::kStopwords), std::end(lcr::kStopwords)), std::end(lcr::kStopwords));
  for (auto w : lcr::kStopwords) EXPECT_TRUE(lcr::is_stopword(w)) << w;
}

TEST(Normalize, StemsWhenAsked) {
  auto out = lcr::normalize({lcr::make_token("Running")}, true, false);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].normalized, "run");
  EXPECT_EQ(out[0].surface, "Running");
}

TEST(Normalize, DropsStopwordsWhenAsked) {
  EXPECT_TRUE(lcr::normalize({lcr::make_token("the")}, false, true).empty());
  EXPECT_EQ(lcr::normalize({lcr::make_token("the")}, false, false).size(), 1u);
}

TEST(Normalize, EmptyInput) { EXPECT_TRUE(lcr::normalize({}, true, true).empty()); }

TEST(Normalize, PreservesOrder) {
  auto out = lcr::normalize({lcr::make_token("Cats"), lcr::make_token("and"), lcr::make_token("dogs")}, true, true);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].normalized, "cat");
  EXPECT_EQ(out[1].normalized, "dog");
}

// Reference pairs from the published description of the algorithm and its
// standard test vocabulary.
TEST(Porter, ReferenceVocabulary) {
  const std::pair<const char*, const char*> cases[] = {
      {"caresses", "caress"},   {"ponies", "poni"},        {"ties", "ti"},
      {"caress", "caress"},     {"cats", "cat"},           {"feed", "feed"},
      {"agreed", "agre"},       {"plastered", "plaster"},  {"bled", "bled"},
      {"motoring", "motor"},    {"sing", "sing"},          {"conflated", "conflat"},
      {"troubled", "troubl"},   {"sized", "size"},         {"hopping", "hop"},
      {"tanned", "tan"},        {"falling", "fall"},       {"hissing", "hiss"},
      {"fizzed", "fizz"},       {"failing", "fail"},       {"filing", "file"},
      {"happy", "happi"},       {"sky", "sky"},            {"relational", "relat"},
      {"conditional", "condit"}, {"rational", "ration"},   {"valenci", "valenc"},
      {"hesitanci", "hesit"},   {"digitizer", "digit"},    {"conformabli", "conform"},
      {"radicalli", "radic"},   {"differentli", "differ"}, {"vileli", "vile"},
      {"analogousli", "analog"}, {"vietnamization", "vietnam"}, {"predication", "predic"},
      {"operator", "oper"},     {"feudalism", "feudal"},   {"decisiveness", "decis"},
      {"hopefulness", "hope"},  {"callousness", "callous"}, {"formaliti", "formal"},
      {"sensitiviti", "sensit"}, {"sensibiliti", "sensibl"}, {"triplicate", "triplic"},
      {"formative", "form"},    {"formalize", "formal"},   {"electriciti", "electr"},
      {"electrical", "electr"}, {"hopeful", "hope"},       {"goodness", "good"},
      {"revival", "reviv"},     {"allowance", "allow"},    {"inference", "infer"},
      {"airliner", "airlin"},   {"gyroscopic", "gyroscop"}, {"adjustable", "adjust"},
      {"defensible", "defens"}, {"irritant", "irrit"},     {"replacement", "replac"},
      {"adjustment", "adjust"}, {"dependent", "depend"},   {"adoption", "adopt"},
      {"homologou", "homolog"}, {"communism", "commun"},   {"activate", "activ"},
      {"angulariti", "angular"}, {"homologous", "homolog"}, {"effective", "effect"},
      {"bowdlerize", "bowdler"}, {"probate", "probat"},    {"rate", "rate"},
      {"cease", "ceas"},        {"controll", "control"},   {"roll", "roll"},
      {"generalizations", "gener"}, {"oscillators", "oscil"}, {"running", "run"},
  };
  for (const auto& [word, stem] : cases) EXPECT_EQ(lcr::porter::stem(word), stem) << word;
}

TEST(Porter, ShortAndNonLowercaseWordsPassThrough) {
  EXPECT_EQ(lcr::porter::stem("as"), "as");
  EXPECT_EQ(lcr::porter::stem("x1s"), "x1s");
}
