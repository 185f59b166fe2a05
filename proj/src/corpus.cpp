#include "radsim/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "radsim/config.hpp"
#include "radsim/csv.hpp"
#include "radsim/error.hpp"

namespace radsim {
namespace {

std::string row_ref(std::size_t line) { return "row at line " + std::to_string(line); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

FindingSchema::FindingSchema(std::vector<std::string> names,
                             std::string no_finding_name)
    : names_(std::move(names)), no_finding_name_(std::move(no_finding_name)) {
  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw Error(ErrorKind::InvalidConfig, "empty finding name");
    if (!seen.insert(n).second) {
      throw Error(ErrorKind::InvalidConfig, "duplicate finding name '" + n + "'");
    }
  }
  const auto idx = index_of(no_finding_name_);
  if (!idx) {
    throw Error(ErrorKind::InvalidConfig, "no_finding_name '" + no_finding_name_ +
                                              "' is not among the finding names");
  }
  no_finding_index_ = *idx;
}

FindingSchema FindingSchema::chexpert_default() {
  return FindingSchema({"Atelectasis", "Cardiomegaly", "Consolidation", "Edema",
                        "Enlarged Cardiomediastinum", "Fracture", "Lung Lesion",
                        "Lung Opacity", "No Finding", "Pleural Effusion",
                        "Pleural Other", "Pneumonia", "Pneumothorax",
                        "Support Devices"},
                       "No Finding");
}

FindingSchema FindingSchema::from_config(const Config& config, std::string_view prefix) {
  const std::string p(prefix);
  auto names = config.get_string_list(p + "finding_names");
  auto no_finding = config.get_string(p + "no_finding_name");
  if (!names && !no_finding) return chexpert_default();
  if (!names) return FindingSchema(chexpert_default().names(), *no_finding);
  return FindingSchema(std::move(*names), no_finding.value_or("No Finding"));
}

std::optional<std::size_t> FindingSchema::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::string_view to_string(LabelSource source) {
  return source == LabelSource::CheXpert ? "CheXpert" : "NegBio";
}

std::string_view slug(LabelSource source) {
  return source == LabelSource::CheXpert ? "chexpert" : "negbio";
}

LabelSource parse_label_source(std::string_view text) {
  if (text == "CheXpert" || text == "chexpert") return LabelSource::CheXpert;
  if (text == "NegBio" || text == "negbio") return LabelSource::NegBio;
  throw Error(ErrorKind::InvalidArgument, "unknown label source '" + std::string(text) + "'");
}

std::vector<Report> parse_reports(std::string_view csv_content) {
  const csv::Table table = csv::parse(csv_content);
  const auto id_col = table.column("report_id");
  const auto text_col = table.column("text");
  if (!id_col) throw Error(ErrorKind::MissingColumn, "header lacks 'report_id'");
  if (!text_col) throw Error(ErrorKind::MissingColumn, "header lacks 'text'");

  std::vector<Report> reports;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    if (row.size() <= std::max(*id_col, *text_col)) {
      throw Error(ErrorKind::MissingColumn, row_ref(line) + " has too few fields");
    }
    Report report{row[*id_col], row[*text_col]};
    if (report.report_id.empty()) {
      throw Error(ErrorKind::MissingReportId, row_ref(line) + " has an empty report_id");
    }
    if (trim(report.text).empty()) {
      throw Error(ErrorKind::EmptyText,
                  row_ref(line) + " (" + report.report_id + ") has empty text");
    }
    if (!seen.insert(report.report_id).second) {
      throw Error(ErrorKind::DuplicateReportId,
                  row_ref(line) + " repeats report_id '" + report.report_id + "'");
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<Report> load_reports(const std::filesystem::path& path) {
  return parse_reports(read_text(path));
}

void write_reports(std::ostream& out, std::span<const Report> reports) {
  csv::write_row(out, {"report_id", "text"});
  for (const auto& r : reports) csv::write_row(out, {r.report_id, r.text});
}

std::vector<FindingVector> parse_finding_vectors(std::string_view csv_content,
                                                 const FindingSchema& schema,
                                                 LabelSource source) {
  const csv::Table table = csv::parse(csv_content);
  const auto id_col = table.column("report_id");
  if (!id_col) throw Error(ErrorKind::MissingReportId, "header lacks 'report_id'");

  // Header position -> schema position.
  std::vector<std::optional<std::size_t>> mapping(table.header.size());
  std::vector<bool> covered(schema.size(), false);
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == *id_col) continue;
    const auto idx = schema.index_of(table.header[c]);
    if (!idx) {
      throw Error(ErrorKind::UnknownLabelColumn,
                  "column '" + table.header[c] + "' is not in the finding schema");
    }
    mapping[c] = idx;
    covered[*idx] = true;
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!covered[i]) {
      throw Error(ErrorKind::MissingColumn,
                  "label column '" + schema.names()[i] + "' is missing");
    }
  }

  std::vector<FindingVector> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    if (row.size() != table.header.size()) {
      throw Error(ErrorKind::InvalidCellValue,
                  row_ref(line) + " has " + std::to_string(row.size()) +
                      " fields, expected " + std::to_string(table.header.size()));
    }
    FindingVector fv;
    fv.report_id = row[*id_col];
    fv.source = source;
    if (fv.report_id.empty()) {
      throw Error(ErrorKind::MissingReportId, row_ref(line) + " has an empty report_id");
    }
    fv.assignments.assign(schema.size(), Mention::Missing);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!mapping[c]) continue;
      const std::string cell = trim(row[c]);
      Mention m;
      if (cell.empty()) {
        m = Mention::Missing;
      } else if (cell == "1.0" || cell == "1") {
        m = Mention::Positive;
      } else if (cell == "0.0" || cell == "0") {
        m = Mention::Negative;
      } else if (cell == "-1.0" || cell == "-1") {
        m = Mention::Uncertain;
      } else {
        throw Error(ErrorKind::InvalidCellValue,
                    row_ref(line) + " (" + fv.report_id + "), column '" +
                        table.header[c] + "': '" + cell + "'");
      }
      fv.assignments[*mapping[c]] = m;
    }
    out.push_back(std::move(fv));
  }
  return out;
}

std::vector<FindingVector> load_finding_vectors(const std::filesystem::path& path,
                                                const FindingSchema& schema,
                                                LabelSource source) {
  return parse_finding_vectors(read_text(path), schema, source);
}

bool is_no_finding_only(const FindingVector& vector, const FindingSchema& schema) {
  if (vector.assignments.size() != schema.size()) {
    throw Error(ErrorKind::SchemaMismatch, "vector for '" + vector.report_id +
                                               "' does not match the schema");
  }
  const std::size_t nf = schema.no_finding_index();
  if (vector.assignments[nf] != Mention::Positive) return false;
  for (std::size_t i = 0; i < vector.assignments.size(); ++i) {
    if (i == nf) continue;
    const Mention m = vector.assignments[i];
    if (m != Mention::Negative && m != Mention::Missing) return false;
  }
  return true;
}

FilterResult filter_no_finding_only(std::span<const Report> reports,
                                    std::span<const FindingVector> chexpert,
                                    std::span<const FindingVector> negbio,
                                    const FindingSchema& schema) {
  std::unordered_map<std::string_view, const FindingVector*> by_chexpert;
  std::unordered_map<std::string_view, const FindingVector*> by_negbio;
  for (const auto& v : chexpert) by_chexpert.emplace(v.report_id, &v);
  for (const auto& v : negbio) by_negbio.emplace(v.report_id, &v);

  FilterResult result;
  for (const auto& report : reports) {
    const auto c = by_chexpert.find(report.report_id);
    const auto n = by_negbio.find(report.report_id);
    if (c == by_chexpert.end() || n == by_negbio.end()) {
      spdlog::warn("dropping report {}: no {} label row", report.report_id,
                   c == by_chexpert.end() ? "CheXpert" : "NegBio");
      result.dropped_missing_labels.push_back(report.report_id);
      continue;
    }
    if (is_no_finding_only(*c->second, schema) && is_no_finding_only(*n->second, schema)) {
      result.excluded.push_back(report.report_id);
    } else {
      result.retained.push_back(report);
    }
  }
  return result;
}

PairSet split_groups(std::span<const Report> reports, std::uint32_t seed,
                     std::optional<std::size_t> group_size) {
  if (reports.empty()) throw Error(ErrorKind::EmptyCorpus, "no reports to split");
  std::vector<std::string> ids;
  ids.reserve(reports.size());
  for (const auto& r : reports) ids.push_back(r.report_id);
  std::sort(ids.begin(), ids.end());

  // Fisher-Yates over raw engine output with rejection sampling; the
  // standard distributions are implementation-defined and would make the
  // split differ between standard libraries.
  std::mt19937 engine(seed);
  constexpr std::uint64_t kRange = std::uint64_t{1} << 32;
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = kRange - (kRange % bound);
    std::uint64_t draw;
    do {
      draw = engine();
    } while (draw >= limit);
    std::swap(ids[i], ids[static_cast<std::size_t>(draw % bound)]);
  }

  PairSet out;
  if (ids.size() % 2 != 0) {
    out.dropped = ids.back();
    spdlog::warn("odd report count {}; leaving out {}", ids.size(), *out.dropped);
    ids.pop_back();
  }
  const std::size_t half = ids.size() / 2;
  std::size_t take = half;
  if (group_size) {
    if (*group_size == 0 || *group_size > half) {
      throw Error(ErrorKind::InvalidArgument,
                  "group size " + std::to_string(*group_size) + " needs " +
                      std::to_string(2 * *group_size) + " reports, have " +
                      std::to_string(ids.size()));
    }
    take = *group_size;
  }
  if (take == 0) throw Error(ErrorKind::EmptyCorpus, "too few reports to form two groups");
  out.group_a.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
  out.group_b.assign(ids.begin() + static_cast<std::ptrdiff_t>(half),
                     ids.begin() + static_cast<std::ptrdiff_t>(half + take));
  return out;
}

PairSet cross_pairs(PairSet groups) {
  if (groups.group_a.empty() || groups.group_b.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "cannot pair an empty group");
  }
  const std::unordered_set<std::string_view> in_a(groups.group_a.begin(),
                                                  groups.group_a.end());
  for (const auto& id : groups.group_b) {
    if (in_a.contains(id)) {
      throw Error(ErrorKind::OverlappingGroups, "report '" + id + "' is in both groups");
    }
  }
  groups.pairs.clear();
  groups.pairs.reserve(groups.group_a.size() * groups.group_b.size());
  for (const auto& a : groups.group_a) {
    for (const auto& b : groups.group_b) groups.pairs.emplace_back(a, b);
  }
  return groups;
}

}  // namespace radsim
