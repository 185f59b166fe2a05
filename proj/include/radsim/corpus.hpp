#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace radsim {

class Config;

struct Report {
  std::string report_id;
  std::string text;

  bool operator==(const Report&) const = default;
};

// Ordered finding-label names. Vector positions everywhere downstream follow
// this order, so a schema must not change during a run.
class FindingSchema {
 public:
  FindingSchema(std::vector<std::string> names, std::string no_finding_name);

  // The 14 CheXpert labels with "No Finding" as the absence label.
  static FindingSchema chexpert_default();
  // Reads `finding_names` and `no_finding_name` under `prefix` (for example
  // "schema."); falls back to the CheXpert default when both are absent.
  static FindingSchema from_config(const Config& config, std::string_view prefix = "");

  const std::vector<std::string>& names() const { return names_; }
  const std::string& no_finding_name() const { return no_finding_name_; }
  std::size_t size() const { return names_.size(); }
  std::size_t no_finding_index() const { return no_finding_index_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const FindingSchema&) const = default;

 private:
  std::vector<std::string> names_;
  std::string no_finding_name_;
  std::size_t no_finding_index_ = 0;
};

enum class LabelSource { CheXpert, NegBio };

std::string_view to_string(LabelSource source);
// Lowercase file/column slug: "chexpert" or "negbio".
std::string_view slug(LabelSource source);
LabelSource parse_label_source(std::string_view text);

enum class Mention { Positive, Negative, Uncertain, Missing };

struct FindingVector {
  std::string report_id;
  LabelSource source = LabelSource::CheXpert;
  // One entry per schema name, in schema order.
  std::vector<Mention> assignments;

  bool operator==(const FindingVector&) const = default;
};

std::vector<Report> load_reports(const std::filesystem::path& path);
std::vector<Report> parse_reports(std::string_view csv_content);
void write_reports(std::ostream& out, std::span<const Report> reports);

std::vector<FindingVector> load_finding_vectors(const std::filesystem::path& path,
                                                const FindingSchema& schema,
                                                LabelSource source);
std::vector<FindingVector> parse_finding_vectors(std::string_view csv_content,
                                                 const FindingSchema& schema,
                                                 LabelSource source);

// True when the only Positive is the no-finding label and every other entry
// is Negative or Missing.
bool is_no_finding_only(const FindingVector& vector, const FindingSchema& schema);

struct FilterResult {
  std::vector<Report> retained;
  // Removed because both sources say "No Finding" and nothing else.
  std::vector<std::string> excluded;
  // Removed because a label row was missing from one or both sources.
  std::vector<std::string> dropped_missing_labels;
};

FilterResult filter_no_finding_only(std::span<const Report> reports,
                                    std::span<const FindingVector> chexpert,
                                    std::span<const FindingVector> negbio,
                                    const FindingSchema& schema);

struct PairSet {
  std::vector<std::string> group_a;
  std::vector<std::string> group_b;
  std::vector<std::pair<std::string, std::string>> pairs;
  // Report left out when the corpus size is odd.
  std::optional<std::string> dropped;
};

// Sorts the ids, shuffles them with a seeded Mersenne Twister and halves the
// result, so the split depends only on the id multiset and the seed. When
// `group_size` is given each group is cut to that size.
PairSet split_groups(std::span<const Report> reports, std::uint32_t seed,
                     std::optional<std::size_t> group_size = std::nullopt);

// Fills `pairs` with group_a x group_b in row-major order.
PairSet cross_pairs(PairSet groups);

}  // namespace radsim
