#include "radsim/eval_harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "radsim/csv.hpp"
#include "radsim/error.hpp"

namespace radsim {
namespace {

double parse_real(const std::string& cell, std::size_t line, std::string_view column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::InvalidCellValue,
                fmt::format("line {}: column {} holds '{}', not a number", line, column, cell));
  }
  return v;
}

std::string optional_real(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::GptSim: return "GPT_sim";
    case Method::Rouge1: return "ROUGE_1_F1";
    case Method::Rouge2: return "ROUGE_2_F1";
    case Method::RougeL: return "ROUGE_L_F1";
    case Method::Bleu: return "BLEU";
  }
  return "BLEU";
}

std::string_view slug(Method method) {
  switch (method) {
    case Method::GptSim: return "gpt_sim";
    case Method::Rouge1: return "rouge1_f1";
    case Method::Rouge2: return "rouge2_f1";
    case Method::RougeL: return "rougel_f1";
    case Method::Bleu: return "bleu";
  }
  return "bleu";
}

Method parse_method(std::string_view text) {
  for (Method m : kAllMethods) {
    if (text == slug(m) || text == to_string(m)) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(text) + "'");
}

double PairScore::value(Method method) const {
  switch (method) {
    case Method::GptSim: return gpt_sim;
    case Method::Rouge1: return rouge1_f1;
    case Method::Rouge2: return rouge2_f1;
    case Method::RougeL: return rougel_f1;
    case Method::Bleu: return bleu;
  }
  return bleu;
}

std::optional<double> PairScore::gt(LabelSource source) const {
  return source == LabelSource::CheXpert ? gt_chexpert : gt_negbio;
}

void ScoringInputs::add_report(const Report& report) {
  tokens.insert_or_assign(report.report_id, tokenize(report.text));
}

PairScore score_pair(const std::string& a_id, const std::string& b_id,
                     const ScoringInputs& inputs) {
  const auto ta = inputs.tokens.find(a_id);
  const auto tb = inputs.tokens.find(b_id);
  if (ta == inputs.tokens.end() || tb == inputs.tokens.end()) {
    throw Error(ErrorKind::InvalidArgument,
                "no report text for '" + (ta == inputs.tokens.end() ? a_id : b_id) + "'");
  }
  const auto ea = inputs.label_embeddings.find(a_id);
  const auto eb = inputs.label_embeddings.find(b_id);
  if (ea == inputs.label_embeddings.end() || eb == inputs.label_embeddings.end()) {
    throw Error(ErrorKind::MissingLabelSet,
                "no label set for '" + (ea == inputs.label_embeddings.end() ? a_id : b_id) + "'");
  }

  PairScore s;
  s.a_id = a_id;
  s.b_id = b_id;
  for (LabelSource source : kAllSources) {
    std::optional<double> gt;
    try {
      gt = gt_similarity(a_id, b_id, source, inputs.encodings);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ZeroVector) throw;
    }
    (source == LabelSource::CheXpert ? s.gt_chexpert : s.gt_negbio) = gt;
  }
  s.gpt_sim = cosine(ea->second, eb->second);
  const auto& cand = ta->second;
  const auto& ref = tb->second;
  s.rouge1_f1 = rouge_n(cand, ref, 1).f1;
  s.rouge2_f1 = rouge_n(cand, ref, 2).f1;
  s.rougel_f1 = rouge_l(cand, ref).f1;
  s.bleu = radsim::bleu(cand, ref, inputs.bleu);
  return s;
}

ScoreRun run_all(std::span<const std::pair<std::string, std::string>> pairs,
                 const ScoringInputs& inputs, std::size_t workers) {
  std::vector<std::optional<PairScore>> slots(pairs.size());
  std::vector<std::string> errors(pairs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pairs.size()) return;
      try {
        slots[i] = score_pair(pairs[i].first, pairs[i].second, inputs);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  {
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, pairs.size()));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
  }

  ScoreRun run;
  run.scores.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (slots[i]) {
      run.scores.push_back(std::move(*slots[i]));
    } else {
      run.failures.push_back({pairs[i].first, pairs[i].second, std::move(errors[i])});
    }
  }
  return run;
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

void write_scores_csv(std::ostream& out, std::span<const PairScore> scores) {
  out << kScoresHeader << '\n';
  for (const auto& s : scores) {
    csv::write_row(out, {s.a_id, s.b_id, optional_real(s.gt_chexpert),
                         optional_real(s.gt_negbio), format_real(s.gpt_sim),
                         format_real(s.rouge1_f1), format_real(s.rouge2_f1),
                         format_real(s.rougel_f1), format_real(s.bleu)});
  }
}

std::vector<PairScore> parse_scores_csv(std::string_view content) {
  const csv::Table table = csv::parse(content);
  static constexpr std::array<std::string_view, 9> kColumns = {
      "a_id", "b_id", "gt_chexpert", "gt_negbio", "gpt_sim",
      "rouge1_f1", "rouge2_f1", "rougel_f1", "bleu"};
  std::array<std::size_t, 9> idx{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const auto found = table.column(kColumns[c]);
    if (!found) {
      throw Error(ErrorKind::MissingColumn,
                  "scores file has no '" + std::string(kColumns[c]) + "' column");
    }
    idx[c] = *found;
  }

  std::vector<PairScore> scores;
  scores.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    auto cell = [&](std::size_t c) -> const std::string& {
      if (idx[c] >= row.size()) {
        throw Error(ErrorKind::InvalidCellValue,
                    fmt::format("line {}: missing column {}", line, kColumns[c]));
      }
      return row[idx[c]];
    };
    auto real = [&](std::size_t c) { return parse_real(cell(c), line, kColumns[c]); };
    auto maybe = [&](std::size_t c) -> std::optional<double> {
      if (cell(c).empty()) return std::nullopt;
      return real(c);
    };
    PairScore s;
    s.a_id = cell(0);
    s.b_id = cell(1);
    s.gt_chexpert = maybe(2);
    s.gt_negbio = maybe(3);
    s.gpt_sim = real(4);
    s.rouge1_f1 = real(5);
    s.rouge2_f1 = real(6);
    s.rougel_f1 = real(7);
    s.bleu = real(8);
    scores.push_back(std::move(s));
  }
  return scores;
}

std::vector<PairScore> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scores_csv(buf.str());
}

std::string_view to_string(DifferenceMode mode) {
  return mode == DifferenceMode::Absolute ? "absolute" : "signed";
}

DifferenceMode parse_difference_mode(std::string_view text) {
  if (text == "absolute") return DifferenceMode::Absolute;
  if (text == "signed") return DifferenceMode::Signed;
  throw Error(ErrorKind::InvalidConfig, "unknown difference mode '" + std::string(text) + "'");
}

const SummaryCell* SummaryTable::find(Method method, LabelSource source) const {
  for (const auto& c : cells) {
    if (c.method == method && c.source == source) return &c;
  }
  return nullptr;
}

std::vector<SummaryCell> mean_differences(std::span<const PairScore> scores,
                                          LabelSource source, DifferenceMode mode) {
  std::vector<SummaryCell> cells;
  for (Method m : kAllMethods) {
    SummaryCell cell{m, source, 0.0, 0, 0};
    double sum = 0.0;
    for (const auto& s : scores) {
      const auto gt = s.gt(source);
      if (!gt) {
        ++cell.pairs_excluded;
        continue;
      }
      const double d = s.value(m) - *gt;
      sum += mode == DifferenceMode::Absolute ? std::abs(d) : d;
      ++cell.pairs_used;
    }
    if (cell.pairs_used == 0) {
      throw Error(ErrorKind::NoValidPairs,
                  fmt::format("no scored pair has a {} ground truth ({} pairs, all excluded)",
                              to_string(source), scores.size()));
    }
    cell.mean_difference = sum / static_cast<double>(cell.pairs_used);
    cells.push_back(cell);
  }
  return cells;
}

SummaryTable summarize(std::span<const PairScore> scores, DifferenceMode mode) {
  SummaryTable table;
  for (LabelSource source : kAllSources) {
    auto cells = mean_differences(scores, source, mode);
    table.cells.insert(table.cells.end(), cells.begin(), cells.end());
  }
  return table;
}

void write_summary_csv(std::ostream& out, const SummaryTable& table) {
  out << "method,source,mean_difference,pairs_used,pairs_excluded\n";
  for (Method m : kAllMethods) {
    for (LabelSource source : kAllSources) {
      const SummaryCell* c = table.find(m, source);
      if (!c) continue;
      out << to_string(m) << ',' << to_string(source) << ',' << format_real(c->mean_difference)
          << ',' << c->pairs_used << ',' << c->pairs_excluded << '\n';
    }
  }
}

std::pair<double, double> hex_center(HexCell cell, double radius) {
  const double dx = std::sqrt(3.0) * radius;
  const double x = (static_cast<double>(cell.col) + (cell.row % 2 != 0 ? 0.5 : 0.0)) * dx;
  const double y = static_cast<double>(cell.row) * (1.5 * radius);
  return {x, y};
}

HexCell hex_cell(double x, double y, double radius) {
  const double dx = std::sqrt(3.0) * radius;
  const double dy = 3.0 * radius;
  const HexCell a{2 * static_cast<long>(std::floor(y / dy + 0.5)),
                  static_cast<long>(std::floor(x / dx + 0.5))};
  const HexCell b{2 * static_cast<long>(std::floor(y / dy)) + 1,
                  static_cast<long>(std::floor(x / dx))};
  const auto [ax, ay] = hex_center(a, radius);
  const auto [bx, by] = hex_center(b, radius);
  const double da = (x - ax) * (x - ax) + (y - ay) * (y - ay);
  const double db = (x - bx) * (x - bx) + (y - by) * (y - by);
  return da <= db ? a : b;
}

std::vector<HexBin> hexbin_points(std::span<const std::pair<double, double>> points,
                                  double radius, std::size_t min_count) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "hex radius must be positive");
  std::map<HexCell, std::size_t> counts;
  for (const auto& [x, y] : points) ++counts[hex_cell(x, y, radius)];
  std::vector<HexBin> bins;
  for (const auto& [cell, count] : counts) {
    if (count <= min_count) continue;
    const auto [cx, cy] = hex_center(cell, radius);
    bins.push_back({cell, cx, cy, count});
  }
  return bins;
}

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::TooFewValues, "percentile of no values");
  const double h = static_cast<double>(sorted.size() - 1) * p / 100.0;
  const double lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i]);
}

std::pair<double, double> percentile_band(std::span<const double> values, double lo,
                                          double hi) {
  if (values.size() < 2) {
    throw Error(ErrorKind::TooFewValues,
                fmt::format("percentile band needs at least 2 values, got {}", values.size()));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return {percentile(sorted, lo), percentile(sorted, hi)};
}

HexbinLayer hexbin(std::span<const PairScore> scores, Method method, LabelSource source,
                   double hex_radius, std::size_t min_count) {
  HexbinLayer layer;
  layer.method = method;
  layer.source = source;
  layer.hex_radius = hex_radius;
  layer.min_count = min_count;

  std::vector<std::pair<double, double>> points;
  std::vector<double> gts;
  for (const auto& s : scores) {
    if (const auto gt = s.gt(source)) {
      points.emplace_back(*gt, s.value(method));
      gts.push_back(*gt);
    }
  }
  layer.points = points.size();
  layer.bins = hexbin_points(points, hex_radius, min_count);
  if (!gts.empty()) {
    std::sort(gts.begin(), gts.end());
    layer.band = std::make_pair(percentile(gts, 5.0), percentile(gts, 95.0));
  }
  return layer;
}

void write_hexbin_csv(std::ostream& out, const HexbinLayer& layer) {
  out << "# method=" << slug(layer.method) << ",source=" << slug(layer.source)
      << ",hex_radius=" << format_real(layer.hex_radius) << ",min_count=" << layer.min_count;
  if (layer.band) {
    out << ",p5=" << format_real(layer.band->first) << ",p95=" << format_real(layer.band->second);
  }
  out << "\nx,y,count\n";
  for (const auto& b : layer.bins) {
    out << format_real(b.x) << ',' << format_real(b.y) << ',' << b.count << '\n';
  }
}

}  // namespace radsim
