#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace radsim {

using TokenSequence = std::vector<std::string>;

// Lowercases ASCII and splits on every maximal run of characters that are
// not ASCII letters or digits. Bytes >= 0x80 count as word characters so
// UTF-8 words stay whole.
TokenSequence tokenize(std::string_view text);

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, std::size_t>;

NgramCounts ngram_counts(std::span<const std::string> tokens, int n);

struct MetricScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static MetricScore from_precision_recall(double precision, double recall);
};

// Clipped n-gram overlap. Components with a zero denominator are 0.
MetricScore rouge_n(std::span<const std::string> candidate,
                    std::span<const std::string> reference, int n);

// Longest-common-subsequence ROUGE with plain F1.
MetricScore rouge_l(std::span<const std::string> candidate,
                    std::span<const std::string> reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct BleuOptions {
  int max_n = 4;
  // When set, zero modified precisions are replaced by `epsilon` instead of
  // zeroing the score.
  bool smoothing = false;
  double epsilon = 1e-9;
};

// Sentence BLEU against a single reference: geometric mean of clipped
// n-gram precisions (uniform weights) times min(1, exp(1 - |ref|/|cand|)).
double bleu(std::span<const std::string> candidate,
            std::span<const std::string> reference, const BleuOptions& options = {});

}  // namespace radsim
