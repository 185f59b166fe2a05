#include "radsim/lexical_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "radsim/error.hpp"

namespace radsim {
namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c >= 0x80;
}

void check_n(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidN, "n-gram order must be >= 1, got " + std::to_string(n));
}

// Joined-key multiset used on the hot path; tokens never contain '\x1f'.
using FlatCounts = std::unordered_map<std::string, std::size_t>;

FlatCounts flat_counts(std::span<const std::string> tokens, std::size_t n) {
  FlatCounts counts;
  if (tokens.size() < n) return counts;
  counts.reserve(tokens.size() - n + 1);
  std::string key;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    key.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

struct Overlap {
  std::size_t clipped = 0;
  std::size_t candidate_total = 0;
  std::size_t reference_total = 0;
};

Overlap clipped_overlap(std::span<const std::string> candidate,
                        std::span<const std::string> reference, std::size_t n) {
  const FlatCounts cand = flat_counts(candidate, n);
  const FlatCounts ref = flat_counts(reference, n);
  Overlap o;
  o.candidate_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
  o.reference_total = reference.size() >= n ? reference.size() - n + 1 : 0;
  for (const auto& [gram, count] : cand) {
    const auto it = ref.find(gram);
    if (it != ref.end()) o.clipped += std::min(count, it->second);
  }
  return o;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

NgramCounts ngram_counts(std::span<const std::string> tokens, int n) {
  check_n(n);
  NgramCounts counts;
  const auto width = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + width <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + width))];
  }
  return counts;
}

MetricScore MetricScore::from_precision_recall(double precision, double recall) {
  MetricScore s{precision, recall, 0.0};
  if (precision + recall > 0.0) s.f1 = 2 * precision * recall / (precision + recall);
  return s;
}

MetricScore rouge_n(std::span<const std::string> candidate,
                    std::span<const std::string> reference, int n) {
  check_n(n);
  const Overlap o = clipped_overlap(candidate, reference, static_cast<std::size_t>(n));
  return MetricScore::from_precision_recall(ratio(o.clipped, o.candidate_total),
                                            ratio(o.clipped, o.reference_total));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

MetricScore rouge_l(std::span<const std::string> candidate,
                    std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return {};
  const std::size_t lcs = lcs_length(candidate, reference);
  return MetricScore::from_precision_recall(ratio(lcs, candidate.size()),
                                            ratio(lcs, reference.size()));
}

double bleu(std::span<const std::string> candidate,
            std::span<const std::string> reference, const BleuOptions& options) {
  check_n(options.max_n);
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= options.max_n; ++n) {
    const Overlap o = clipped_overlap(candidate, reference, static_cast<std::size_t>(n));
    double p = ratio(o.clipped, o.candidate_total);
    if (p == 0.0) {
      if (!options.smoothing) return 0.0;
      p = options.epsilon;
    }
    log_sum += std::log(p);
  }
  const double brevity =
      std::min(1.0, std::exp(1.0 - static_cast<double>(reference.size()) /
                                       static_cast<double>(candidate.size())));
  return brevity * std::exp(log_sum / options.max_n);
}

}  // namespace radsim
