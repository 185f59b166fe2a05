#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radsim/chat_provider.hpp"
#include "radsim/corpus.hpp"
#include "radsim/embedding_sim.hpp"
#include "radsim/error.hpp"
#include "radsim/eval_harness.hpp"
#include "radsim/lexical_metrics.hpp"

namespace radsim {

// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint32_t> seed;
  std::optional<std::string> provider;
  std::optional<std::string> embedder;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::filesystem::path> cache_dir;
};

struct RunConfig {
  std::filesystem::path reports;
  std::filesystem::path chexpert;
  std::filesystem::path negbio;
  std::filesystem::path prompts_dir;
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;

  std::uint32_t seed = 0;
  std::optional<std::size_t> group_size;
  FindingSchema schema = FindingSchema::chexpert_default();

  // "mock" or "http".
  std::string chat_provider = "mock";
  std::filesystem::path lexicon;
  ChatProviderConfig chat;
  std::string task_pattern = "finding";
  std::size_t sample_size = 4;

  // "hashed", "http" or "file".
  std::string embedding_kind = "hashed";
  std::size_t embedding_dimension = 256;
  std::uint64_t hash_seed = 0;
  std::string embedding_url;
  std::filesystem::path embedding_file;
  CombineMode combine_mode = CombineMode::Join;

  BleuOptions bleu;
  DifferenceMode difference_mode = DifferenceMode::Absolute;
  double hex_radius = 0.05;
  std::size_t min_count = 100;

  std::size_t label_requests = 4;
  std::size_t embed_batches = 4;
  std::size_t embed_batch_size = 64;
  std::size_t scoring_workers = 4;

  // Relative paths in the file resolve against its directory; override
  // paths resolve against the working directory. A seed is required.
  static RunConfig load(const std::filesystem::path& path, const Overrides& overrides = {});

  // Checks that every referenced input exists. Throws Io naming the path.
  void validate() const;

  std::filesystem::path manifest_path() const { return output_dir / "manifest.json"; }
  std::filesystem::path labeling_path() const { return output_dir / "labeling.json"; }
  std::filesystem::path scores_path() const { return output_dir / "scores.csv"; }
  std::filesystem::path report_dir() const { return output_dir / "report"; }
  std::filesystem::path label_cache_path() const { return cache_dir / "labels.jsonl"; }
  std::filesystem::path embedding_cache_path() const { return cache_dir / "embeddings.jsonl"; }
};

struct IngestResult {
  std::size_t total = 0;
  std::size_t retained = 0;
  std::size_t excluded = 0;
  std::size_t dropped_missing_labels = 0;
  std::size_t pairs = 0;
};

struct LabelResult {
  std::size_t labeled = 0;
  std::size_t failed = 0;
  std::size_t provider_calls = 0;
};

struct ScoreResult {
  std::size_t pairs = 0;
  std::size_t failed_pairs = 0;
  std::size_t embedded_texts = 0;
};

struct ReportResult {
  std::size_t svgs = 0;
  std::size_t skipped_layers = 0;
};

// Providers default to the ones the config describes; tests pass their own.
IngestResult cmd_ingest(const RunConfig& config);
LabelResult cmd_label(const RunConfig& config, ChatProvider* provider = nullptr);
ScoreResult cmd_score(const RunConfig& config, EmbeddingProvider* provider = nullptr);
ReportResult cmd_report(const RunConfig& config);

std::unique_ptr<ChatProvider> make_chat_provider(const RunConfig& config);
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunConfig& config);

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitInput = 2,
  kExitPrerequisite = 3,
  kExitDegenerate = 4,
  kExitProvider = 5,
};

int exit_code_for(ErrorKind kind);

}  // namespace radsim
