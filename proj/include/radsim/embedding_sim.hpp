#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "radsim/llm_labeling.hpp"

namespace radsim {

struct EmbeddingVector {
  std::vector<double> values;
  std::string fingerprint;
};

// Backend that turns texts into vectors. Returned vectors need not be
// normalized; the Embedder renormalizes everything it receives.
// Implementations must be safe to call from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // Identifies provider and model; part of the embedding cache key.
  virtual std::string fingerprint() = 0;
  virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) = 0;
};

// Feature hashing of lowercase unigrams into `dimension` buckets, unsigned.
// Returns raw counts.
class HashedEmbedder : public EmbeddingProvider {
 public:
  static constexpr std::size_t kMinDimension = 64;

  explicit HashedEmbedder(std::size_t dimension = 256, std::uint64_t seed = 0);

  std::string fingerprint() override;
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;
  std::vector<double> embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

struct HttpEmbedderConfig {
  // Service root, e.g. "http://127.0.0.1:8000".
  std::string url;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds initial_backoff{500};
};

// Client for the embedding sidecar:
//   POST /embed {"texts": [...]} -> {"model", "dim", "vectors"}
//   GET /health -> {"status": "ok", "model"}
// 429 and 5xx are retried; 400 and other statuses fail immediately.
class HttpEmbedder : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(HttpEmbedderConfig config);

  // Model id reported by /health. Throws ProviderError unless the service
  // reports status "ok".
  std::string health();

  // "http:<model>"; queries /health once.
  std::string fingerprint() override;
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;

 private:
  HttpEmbedderConfig config_;
  std::string base_;
  std::string prefix_;
  std::mutex mutex_;
  std::optional<std::string> model_;
};

// Vectors looked up by the SHA-256 of the text, from JSON lines
// {"text_sha256": ..., "vector": [...]}.
class PrecomputedFileEmbedder : public EmbeddingProvider {
 public:
  explicit PrecomputedFileEmbedder(const std::filesystem::path& path);

  std::string fingerprint() override { return fingerprint_; }
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) override;
  std::size_t size() const { return vectors_.size(); }

 private:
  std::string fingerprint_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Unit vectors keyed by (text sha256, provider fingerprint), persisted as
// JSON lines. Same write discipline as LabelCache.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path = {});

  std::optional<std::vector<double>> lookup(const std::string& text_sha256,
                                            const std::string& fingerprint) const;
  void store(const std::string& text_sha256, const std::string& fingerprint,
             const std::vector<double>& vector);
  void compact();
  std::size_t size() const;

 private:
  using Key = std::pair<std::string, std::string>;

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<Key, std::vector<double>> vectors_;
  std::ofstream appender_;
};

// x / ||x||. Throws NormalizationFailure on a zero or non-finite norm.
std::vector<double> normalize(std::span<const double> values);

struct EmbedderOptions {
  std::size_t batch_size = 64;
  std::size_t concurrency = 4;
};

// Cache-first front end over a provider. Uncached distinct texts go out in
// batches, at most `concurrency` at once.
class Embedder {
 public:
  Embedder(EmbeddingProvider& provider, EmbeddingCache& cache, EmbedderOptions options = {});

  // One unit vector per text, in input order. Throws InvalidArgument on an
  // empty text and DimensionMismatch when dimensions differ within the run.
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts);

  std::size_t provider_texts() const { return provider_texts_.load(); }
  std::size_t provider_batches() const { return provider_batches_.load(); }
  std::optional<std::size_t> dimension() const;

 private:
  void check_dimension(std::size_t d);

  EmbeddingProvider& provider_;
  EmbeddingCache& cache_;
  EmbedderOptions options_;
  std::atomic<std::size_t> provider_texts_{0};
  std::atomic<std::size_t> provider_batches_{0};
  mutable std::mutex dim_mutex_;
  std::optional<std::size_t> dimension_;
};

enum class CombineMode { Join, MeanPool };

std::string_view to_string(CombineMode mode);
// "join" or "mean-pool".
CombineMode parse_combine_mode(std::string_view text);

// Trimmed labels joined with "; ". Throws EmptyLabelSet when no label is
// left after trimming.
std::string labelset_to_text(const GeneratedLabelSet& set);

// Unit embedding of each label set, keyed by report id. MeanPool embeds
// every label, sums them in sorted label order and renormalizes, so label
// order within a set has no effect.
std::map<std::string, std::vector<double>> embed_label_sets(
    std::span<const GeneratedLabelSet> sets, Embedder& embedder, CombineMode mode);

double gpt_sim(const GeneratedLabelSet& a, const GeneratedLabelSet& b, Embedder& embedder,
               CombineMode mode = CombineMode::Join);

}  // namespace radsim
