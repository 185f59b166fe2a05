#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radsim/corpus.hpp"
#include "radsim/gt_similarity.hpp"
#include "radsim/lexical_metrics.hpp"

namespace radsim {

enum class Method { GptSim, Rouge1, Rouge2, RougeL, Bleu };

inline constexpr std::array<Method, 5> kAllMethods = {Method::GptSim, Method::Rouge1,
                                                      Method::Rouge2, Method::RougeL,
                                                      Method::Bleu};
inline constexpr std::array<LabelSource, 2> kAllSources = {LabelSource::CheXpert,
                                                           LabelSource::NegBio};

// Table name: "GPT_sim", "ROUGE_1_F1", "ROUGE_2_F1", "ROUGE_L_F1", "BLEU".
std::string_view to_string(Method method);
// Column and file slug: "gpt_sim", "rouge1_f1", "rouge2_f1", "rougel_f1", "bleu".
std::string_view slug(Method method);
Method parse_method(std::string_view text);

struct PairScore {
  std::string a_id;
  std::string b_id;
  // Absent when either report encodes to the zero vector.
  std::optional<double> gt_chexpert;
  std::optional<double> gt_negbio;
  double gpt_sim = 0.0;
  double rouge1_f1 = 0.0;
  double rouge2_f1 = 0.0;
  double rougel_f1 = 0.0;
  double bleu = 0.0;

  double value(Method method) const;
  std::optional<double> gt(LabelSource source) const;

  bool operator==(const PairScore&) const = default;
};

struct ScoringInputs {
  std::map<std::string, TokenSequence> tokens;
  std::map<std::string, std::vector<double>> label_embeddings;
  EncodedStore encodings;
  BleuOptions bleu;

  void add_report(const Report& report);
};

// Lexical metrics take a as candidate and b as reference.
// Throws MissingLabelSet or MissingEncoding.
PairScore score_pair(const std::string& a_id, const std::string& b_id,
                     const ScoringInputs& inputs);

struct PairFailure {
  std::string a_id;
  std::string b_id;
  std::string message;
};

struct ScoreRun {
  // In pair order; failed pairs are left out.
  std::vector<PairScore> scores;
  std::vector<PairFailure> failures;
};

ScoreRun run_all(std::span<const std::pair<std::string, std::string>> pairs,
                 const ScoringInputs& inputs, std::size_t workers = 4);

inline constexpr std::string_view kScoresHeader =
    "a_id,b_id,gt_chexpert,gt_negbio,gpt_sim,rouge1_f1,rouge2_f1,rougel_f1,bleu";

// printf "%.10g".
std::string format_real(double value);

void write_scores_csv(std::ostream& out, std::span<const PairScore> scores);
std::vector<PairScore> parse_scores_csv(std::string_view content);
std::vector<PairScore> read_scores_csv(const std::filesystem::path& path);

enum class DifferenceMode { Absolute, Signed };

std::string_view to_string(DifferenceMode mode);
DifferenceMode parse_difference_mode(std::string_view text);

struct SummaryCell {
  Method method = Method::GptSim;
  LabelSource source = LabelSource::CheXpert;
  double mean_difference = 0.0;
  std::size_t pairs_used = 0;
  std::size_t pairs_excluded = 0;
};

struct SummaryTable {
  std::vector<SummaryCell> cells;

  const SummaryCell* find(Method method, LabelSource source) const;
};

// One cell per method for `source`: mean of |score - gt| (or score - gt)
// over pairs with gt present. Throws NoValidPairs when no pair has gt.
std::vector<SummaryCell> mean_differences(std::span<const PairScore> scores,
                                          LabelSource source,
                                          DifferenceMode mode = DifferenceMode::Absolute);

SummaryTable summarize(std::span<const PairScore> scores,
                       DifferenceMode mode = DifferenceMode::Absolute);

// method,source,mean_difference,pairs_used,pairs_excluded
void write_summary_csv(std::ostream& out, const SummaryTable& table);

// Pointy-top hexagonal lattice with circumradius r. Even rows sit at
// y = row * 1.5r, x = col * sqrt(3)r; odd rows are shifted by half a column.
struct HexCell {
  long row = 0;
  long col = 0;

  auto operator<=>(const HexCell&) const = default;
};

std::pair<double, double> hex_center(HexCell cell, double radius);
// Nearest lattice center; ties go to the even row.
HexCell hex_cell(double x, double y, double radius);

struct HexBin {
  HexCell cell;
  double x = 0.0;
  double y = 0.0;
  std::size_t count = 0;
};

// Bins with count > min_count, sorted by (row, col).
std::vector<HexBin> hexbin_points(std::span<const std::pair<double, double>> points,
                                  double radius, std::size_t min_count);

// Linear interpolation between order statistics of sorted values.
double percentile(std::span<const double> sorted, double p);
// Throws TooFewValues for fewer than two values.
std::pair<double, double> percentile_band(std::span<const double> values, double lo = 5.0,
                                          double hi = 95.0);

struct HexbinLayer {
  Method method = Method::GptSim;
  LabelSource source = LabelSource::CheXpert;
  double hex_radius = 0.05;
  std::size_t min_count = 100;
  std::size_t points = 0;
  std::vector<HexBin> bins;
  // GT 5th and 95th percentiles; absent when there are no points.
  std::optional<std::pair<double, double>> band;
};

// x = GT similarity, y = method score, over pairs with gt present.
HexbinLayer hexbin(std::span<const PairScore> scores, Method method, LabelSource source,
                   double hex_radius = 0.05, std::size_t min_count = 100);

// "# method=...,source=...,hex_radius=...,min_count=...,p5=...,p95=..." then x,y,count.
void write_hexbin_csv(std::ostream& out, const HexbinLayer& layer);

}  // namespace radsim
