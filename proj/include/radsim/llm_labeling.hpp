#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radsim/chat_provider.hpp"
#include "radsim/corpus.hpp"

namespace radsim {

// The three prompt files of the labeling pipeline. Placeholders
// {{report_text}} and {{task_instruction}} are substituted verbatim.
struct PromptTemplates {
  std::string identify;
  std::string tasks;
  std::string labels;

  static PromptTemplates load(const std::filesystem::path& dir);
};

std::string render_template(std::string_view tmpl, std::string_view report_text,
                            std::string_view task_instruction = {});

struct TaskDefinition {
  std::string task_id;
  std::string name;
  std::string instruction;
  std::string audience;

  bool operator==(const TaskDefinition&) const = default;
};

struct GeneratedLabelSet {
  std::string report_id;
  std::string task_id;
  std::vector<std::string> labels;
  std::string raw_response;
  std::string model;
  double temperature = 0.0;

  bool operator==(const GeneratedLabelSet&) const = default;
};

inline constexpr std::size_t kMaxLabelLength = 120;

// Accepts "1." / "1)" / "-" / "*" list markers, one label per line; other
// lines are ignored. Labels are trimmed, stripped of wrapping quotes, bold
// markers and a trailing period, and deduplicated case-insensitively. Lines
// longer than kMaxLabelLength code points are dropped.
// Throws UnparseableResponse when no list item is present and EmptyLabelList
// when every item was empty or dropped.
std::vector<std::string> parse_label_list(std::string_view response);

// Parses "<n>. <name>: <instruction> [audience: <who>]" lines. Requires at
// least one task whose name mentions "finding".
std::vector<TaskDefinition> parse_task_list(std::string_view response);

// Case-insensitive substring match on task names; stands in for the manual
// review that picks the findings-based task.
const TaskDefinition& select_task(std::span<const TaskDefinition> tasks,
                                  std::string_view pattern);

// One cached chat exchange. `subject` is the report id, or "sample:<ids>"
// for the task-generation request.
struct CacheRecord {
  std::string stage;
  std::string subject;
  std::string task_id;
  std::string model;
  double temperature = 0.0;
  std::string prompt_sha256;
  std::vector<std::string> labels;
  std::string raw_response;
  bool parse_error = false;

  std::string key() const;
};

// JSON-lines store of chat responses. Writes go through one mutex-guarded
// appender and are flushed per record, so a crashed batch keeps what it
// finished. compact() rewrites the file sorted by key.
class LabelCache {
 public:
  // An empty path keeps the cache in memory only.
  explicit LabelCache(std::filesystem::path path = {});

  std::optional<CacheRecord> lookup(const std::string& key) const;
  void store(const CacheRecord& record);
  void compact();
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, CacheRecord> records_;
  std::ofstream appender_;
};

struct LabelingContext {
  ChatProvider& provider;
  const PromptTemplates& prompts;
  LabelCache& cache;
};

std::string identify_text(LabelingContext& ctx, const Report& report);

std::vector<TaskDefinition> generate_tasks(LabelingContext& ctx,
                                           std::span<const Report> samples);

GeneratedLabelSet generate_labels(LabelingContext& ctx, const Report& report,
                                  const TaskDefinition& task);

// Cache-only lookup of what generate_labels would return; never calls a
// provider.
std::optional<GeneratedLabelSet> cached_labels(const LabelCache& cache,
                                               const PromptTemplates& prompts,
                                               const Report& report, const TaskDefinition& task,
                                               const std::string& model, double temperature);

struct LabelingOutcome {
  std::map<std::string, GeneratedLabelSet> labels;
  // report_id -> error message, for reports that still failed after retries.
  std::map<std::string, std::string> failures;
};

// Labels every report with at most `concurrency` requests in flight. A
// failing report is recorded and the batch carries on.
LabelingOutcome label_corpus(LabelingContext& ctx, std::span<const Report> reports,
                             const TaskDefinition& task, std::size_t concurrency = 4);

}  // namespace radsim
