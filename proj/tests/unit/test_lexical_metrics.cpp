#include <gtest/gtest.h>

#include <random>

#include "radsim/lexical_metrics.hpp"
#include "test_support.hpp"

using namespace radsim;

namespace {

TokenSequence toks(std::string_view s) { return tokenize(s); }

TokenSequence random_tokens(std::mt19937& rng, std::size_t max_len) {
  static const char* vocab[] = {"a", "b", "c", "d", "effusion", "no"};
  TokenSequence out(rng() % (max_len + 1));
  for (auto& t : out) t = vocab[rng() % 6];
  return out;
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(toks("No acute-cardiopulmonary, PROCESS."),
            (TokenSequence{"no", "acute", "cardiopulmonary", "process"}));
  EXPECT_EQ(toks("  \n\t"), TokenSequence{});
  EXPECT_EQ(toks("T12 x2"), (TokenSequence{"t12", "x2"}));
  EXPECT_EQ(toks("caf\xC3\xA9 ok"), (TokenSequence{"caf\xC3\xA9", "ok"}));
}

TEST(Ngrams, CountsAndInvalidN) {
  const auto counts = ngram_counts(toks("a b a b"), 2);
  EXPECT_EQ(counts.at(Ngram{"a", "b"}), 2u);
  EXPECT_EQ(counts.at(Ngram{"b", "a"}), 1u);
  EXPECT_TRUE(ngram_counts(toks("a"), 2).empty());
  EXPECT_ERROR_KIND(ngram_counts(toks("a"), 0), InvalidN);
  EXPECT_ERROR_KIND(rouge_n(toks("a"), toks("a"), 0), InvalidN);
}

TEST(Rouge, KnownValues) {
  const auto r1 = rouge_n(toks("the cat sat"), toks("the cat ran"), 1);
  EXPECT_DOUBLE_EQ(r1.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r1.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r1.f1, 2.0 / 3.0);
  const auto r2 = rouge_n(toks("the cat sat"), toks("the cat ran"), 2);
  EXPECT_DOUBLE_EQ(r2.f1, 0.5);
  // Clipping: candidate repeats "the" beyond the reference count.
  const auto clipped = rouge_n(toks("the the the"), toks("the cat"), 1);
  EXPECT_DOUBLE_EQ(clipped.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(clipped.recall, 0.5);
}

TEST(Rouge, EmptyAndShortInputs) {
  EXPECT_EQ(rouge_n({}, toks("a"), 1).f1, 0.0);
  EXPECT_EQ(rouge_n(toks("a"), toks("a"), 2).f1, 0.0);
  EXPECT_EQ(rouge_l({}, {}).f1, 0.0);
}

TEST(RougeL, KnownValue) {
  const auto s = rouge_l(toks("a b c d"), toks("a c b d"));
  EXPECT_EQ(lcs_length(toks("a b c d"), toks("a c b d")), 3u);
  EXPECT_DOUBLE_EQ(s.f1, 0.75);
}

TEST(Bleu, KnownValues) {
  EXPECT_NEAR(bleu(toks("the cat sat on the mat"), toks("the cat sat on a mat")),
              0.537284965911771, 1e-12);
  EXPECT_EQ(bleu(toks("a b c"), toks("a b d")), 0.0);
  EXPECT_EQ(bleu({}, toks("a")), 0.0);
  EXPECT_DOUBLE_EQ(bleu(toks("a b c d"), toks("a b c d")), 1.0);
}

TEST(Bleu, BrevityPenaltyForShortCandidates) {
  const auto ref = toks("a b c d e f g h");
  const double v = bleu(toks("a b c d"), ref);
  EXPECT_NEAR(v, std::exp(1.0 - 8.0 / 4.0), 1e-12);
}

TEST(Bleu, SmoothingReplacesZeroPrecisions) {
  BleuOptions opts;
  opts.smoothing = true;
  const double v = bleu(toks("a b c"), toks("a b d"), opts);
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1e-3);
  opts.max_n = 2;
  opts.smoothing = false;
  EXPECT_NEAR(bleu(toks("a b c"), toks("a b d"), opts), std::sqrt(2.0 / 3.0 * 0.5), 1e-12);
  opts.max_n = 0;
  EXPECT_ERROR_KIND(bleu(toks("a"), toks("a"), opts), InvalidN);
}

TEST(MetricProperties, RangesSymmetryAndIdentity) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_tokens(rng, 8);
    const auto b = random_tokens(rng, 8);
    for (int n = 1; n <= 3; ++n) {
      const auto ab = rouge_n(a, b, n);
      const auto ba = rouge_n(b, a, n);
      EXPECT_EQ(ab.f1, ba.f1);
      EXPECT_EQ(ab.precision, ba.recall);
      EXPECT_GE(ab.f1, 0.0);
      EXPECT_LE(ab.f1, 1.0);
      if (a.size() >= static_cast<std::size_t>(n)) EXPECT_EQ(rouge_n(a, a, n).f1, 1.0);
    }
    EXPECT_EQ(rouge_l(a, b).f1, rouge_l(b, a).f1);
    const double bl = bleu(a, b);
    EXPECT_GE(bl, 0.0);
    EXPECT_LE(bl, 1.0 + 1e-15);
    if (!a.empty()) EXPECT_EQ(rouge_l(a, a).f1, 1.0);
  }
}
