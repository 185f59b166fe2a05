#include "radsim/embedding_sim.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "http_client.hpp"
#include "radsim/chat_provider.hpp"
#include "radsim/error.hpp"
#include "radsim/gt_similarity.hpp"
#include "radsim/hashing.hpp"
#include "radsim/lexical_metrics.hpp"

namespace radsim {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<double> read_vector(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::ProviderError, "vector is not a JSON array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw Error(ErrorKind::ProviderError, "vector has a non-numeric entry");
    v.push_back(x.get<double>());
  }
  return v;
}

std::vector<std::string> trimmed_labels(const GeneratedLabelSet& set) {
  std::vector<std::string> out;
  for (const auto& label : set.labels) {
    std::string t = trim(label);
    if (!t.empty()) out.push_back(std::move(t));
  }
  if (out.empty()) {
    throw Error(ErrorKind::EmptyLabelSet, "label set for '" + set.report_id + "' is empty");
  }
  return out;
}

}  // namespace

HashedEmbedder::HashedEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ < kMinDimension) {
    throw Error(ErrorKind::InvalidConfig,
                fmt::format("hashed embedding dimension must be >= {}, got {}", kMinDimension,
                            dimension_));
  }
}

std::string HashedEmbedder::fingerprint() {
  return fmt::format("hashed:d={}:seed={}", dimension_, seed_);
}

std::vector<double> HashedEmbedder::embed_one(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  for (const auto& token : tokenize(text)) v[fnv1a64(token, seed_) % dimension_] += 1.0;
  return v;
}

std::vector<std::vector<double>> HashedEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config) : config_(std::move(config)) {
  std::tie(base_, prefix_) = split_url(config_.url);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

std::string HttpEmbedder::health() {
  const detail::RetryPolicy policy{config_.max_retries, config_.timeout,
                                   config_.initial_backoff};
  const auto res = detail::send_with_retry(base_, "GET", prefix_ + "/health", {}, "", policy);
  if (res.status != 200) {
    throw Error(ErrorKind::ProviderError,
                fmt::format("embedding service health check returned HTTP {}", res.status));
  }
  try {
    const auto j = nlohmann::json::parse(res.body);
    if (j.at("status").get<std::string>() != "ok") {
      throw Error(ErrorKind::ProviderError, "embedding service is not ready: " + res.body);
    }
    return j.at("model").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ProviderError,
                std::string("malformed health response: ") + e.what());
  }
}

std::string HttpEmbedder::fingerprint() {
  std::lock_guard lock(mutex_);
  if (!model_) model_ = health();
  return "http:" + *model_;
}

std::vector<std::vector<double>> HttpEmbedder::embed_batch(std::span<const std::string> texts) {
  nlohmann::json body;
  body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  const detail::RetryPolicy policy{config_.max_retries, config_.timeout,
                                   config_.initial_backoff};
  const auto res =
      detail::send_with_retry(base_, "POST", prefix_ + "/embed", {}, body.dump(), policy);
  if (res.status != 200) {
    throw Error(ErrorKind::ProviderError,
                fmt::format("embedding service returned HTTP {}: {}", res.status,
                            res.body.substr(0, 200)));
  }

  std::vector<std::vector<double>> vectors;
  std::size_t dim = 0;
  try {
    const auto j = nlohmann::json::parse(res.body);
    dim = j.at("dim").get<std::size_t>();
    const auto model = j.at("model").get<std::string>();
    {
      std::lock_guard lock(mutex_);
      if (model_ && *model_ != model) {
        throw Error(ErrorKind::ProviderError, fmt::format("embedding model changed from '{}' to '{}'",
                                                          *model_, model));
      }
    }
    for (const auto& v : j.at("vectors")) vectors.push_back(read_vector(v));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ProviderError,
                std::string("malformed embedding response: ") + e.what());
  }
  if (vectors.size() != texts.size()) {
    throw Error(ErrorKind::ProviderError,
                fmt::format("sent {} texts, received {} vectors", texts.size(), vectors.size()));
  }
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  fmt::format("response declares dim {} but has a vector of length {}", dim,
                              v.size()));
    }
  }
  return vectors;
}

PrecomputedFileEmbedder::PrecomputedFileEmbedder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open embedding file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  fingerprint_ = "file:" + sha256_hex(content).substr(0, 16);

  std::istringstream lines(content);
  std::string line;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      vectors_.insert_or_assign(j.at("text_sha256").get<std::string>(),
                                read_vector(j.at("vector")));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Io,
                  fmt::format("{}:{}: bad embedding record: {}", path.string(), number, e.what()));
    }
  }
}

std::vector<std::vector<double>> PrecomputedFileEmbedder::embed_batch(
    std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const std::string sha = sha256_hex(t);
    const auto it = vectors_.find(sha);
    if (it == vectors_.end()) {
      throw Error(ErrorKind::ProviderError, "no precomputed embedding for text " + sha);
    }
    out.push_back(it->second);
  }
  return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read cache " + path_.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      vectors_.insert_or_assign(
          Key{j.at("text_sha256").get<std::string>(), j.at("fingerprint").get<std::string>()},
          j.at("vector").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      spdlog::warn("{}:{}: skipping unreadable cache line ({})", path_.string(), number,
                   e.what());
    }
  }
}

std::optional<std::vector<double>> EmbeddingCache::lookup(const std::string& text_sha256,
                                                          const std::string& fingerprint) const {
  std::lock_guard lock(mutex_);
  const auto it = vectors_.find(Key{text_sha256, fingerprint});
  if (it == vectors_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string record_line(const std::string& sha, const std::string& fingerprint,
                        const std::vector<double>& vector) {
  nlohmann::json j;
  j["text_sha256"] = sha;
  j["fingerprint"] = fingerprint;
  j["vector"] = vector;
  return j.dump();
}

}  // namespace

void EmbeddingCache::store(const std::string& text_sha256, const std::string& fingerprint,
                           const std::vector<double>& vector) {
  std::lock_guard lock(mutex_);
  vectors_.insert_or_assign(Key{text_sha256, fingerprint}, vector);
  if (path_.empty()) return;
  if (!appender_.is_open()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    appender_.open(path_, std::ios::binary | std::ios::app);
    if (!appender_) throw Error(ErrorKind::Io, "cannot append to " + path_.string());
  }
  appender_ << record_line(text_sha256, fingerprint, vector) << '\n';
  appender_.flush();
}

void EmbeddingCache::compact() {
  std::lock_guard lock(mutex_);
  if (path_.empty()) return;
  if (appender_.is_open()) appender_.close();
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  auto tmp = path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    for (const auto& [key, vector] : vectors_) {
      out << record_line(key.first, key.second, vector) << '\n';
    }
  }
  std::filesystem::rename(tmp, path_);
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return vectors_.size();
}

std::vector<double> normalize(std::span<const double> values) {
  double ss = 0.0;
  for (double x : values) ss += x * x;
  const double norm = std::sqrt(ss);
  if (norm == 0.0 || !std::isfinite(norm)) {
    throw Error(ErrorKind::NormalizationFailure,
                norm == 0.0 ? "cannot normalize a zero vector" : "vector norm is not finite");
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (double x : values) out.push_back(x / norm);
  return out;
}

Embedder::Embedder(EmbeddingProvider& provider, EmbeddingCache& cache, EmbedderOptions options)
    : provider_(provider), cache_(cache), options_(options) {
  if (options_.batch_size == 0) options_.batch_size = 1;
  if (options_.concurrency == 0) options_.concurrency = 1;
}

std::optional<std::size_t> Embedder::dimension() const {
  std::lock_guard lock(dim_mutex_);
  return dimension_;
}

void Embedder::check_dimension(std::size_t d) {
  std::lock_guard lock(dim_mutex_);
  if (!dimension_) {
    dimension_ = d;
  } else if (*dimension_ != d) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("embedding dimension {} differs from {} seen earlier", d, *dimension_));
  }
}

std::vector<EmbeddingVector> Embedder::embed(std::span<const std::string> texts) {
  if (texts.empty()) return {};
  for (const auto& t : texts) {
    if (trim(t).empty()) throw Error(ErrorKind::InvalidArgument, "cannot embed an empty text");
  }
  const std::string fp = provider_.fingerprint();

  std::vector<std::string> shas;
  shas.reserve(texts.size());
  std::map<std::string, std::vector<double>> resolved;
  std::vector<std::string> pending;
  std::vector<std::string> pending_shas;
  for (const auto& t : texts) {
    shas.push_back(sha256_hex(t));
    const auto& sha = shas.back();
    if (resolved.contains(sha)) continue;
    if (auto hit = cache_.lookup(sha, fp)) {
      resolved.emplace(sha, std::move(*hit));
    } else if (std::find(pending_shas.begin(), pending_shas.end(), sha) == pending_shas.end()) {
      pending.push_back(t);
      pending_shas.push_back(sha);
    }
  }

  const std::size_t batches = (pending.size() + options_.batch_size - 1) / options_.batch_size;
  std::vector<std::vector<std::vector<double>>> results(batches);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (true) {
      const std::size_t b = next.fetch_add(1);
      if (b >= batches) return;
      {
        std::lock_guard lock(error_mutex);
        if (first_error) return;
      }
      const std::size_t begin = b * options_.batch_size;
      const std::size_t end = std::min(pending.size(), begin + options_.batch_size);
      try {
        auto raw = provider_.embed_batch(
            std::span<const std::string>(pending).subspan(begin, end - begin));
        ++provider_batches_;
        provider_texts_ += end - begin;
        if (raw.size() != end - begin) {
          throw Error(ErrorKind::ProviderError,
                      fmt::format("provider returned {} vectors for {} texts", raw.size(),
                                  end - begin));
        }
        for (std::size_t i = 0; i < raw.size(); ++i) {
          check_dimension(raw[i].size());
          raw[i] = normalize(raw[i]);
          cache_.store(pending_shas[begin + i], fp, raw[i]);
        }
        results[b] = std::move(raw);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (batches > 0) {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::min(options_.concurrency, batches);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < results[b].size(); ++i) {
      resolved.emplace(pending_shas[b * options_.batch_size + i], std::move(results[b][i]));
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& sha : shas) {
    const auto& v = resolved.at(sha);
    check_dimension(v.size());
    out.push_back({v, fp});
  }
  return out;
}

std::string_view to_string(CombineMode mode) {
  return mode == CombineMode::Join ? "join" : "mean-pool";
}

CombineMode parse_combine_mode(std::string_view text) {
  if (text == "join") return CombineMode::Join;
  if (text == "mean-pool" || text == "mean_pool") return CombineMode::MeanPool;
  throw Error(ErrorKind::InvalidConfig, "unknown combine mode '" + std::string(text) + "'");
}

std::string labelset_to_text(const GeneratedLabelSet& set) {
  std::string out;
  for (const auto& label : trimmed_labels(set)) {
    if (!out.empty()) out += "; ";
    out += label;
  }
  return out;
}

namespace {

std::vector<std::vector<double>> embed_sets_in_order(std::span<const GeneratedLabelSet> sets,
                                                     Embedder& embedder, CombineMode mode) {
  std::vector<std::vector<double>> out;
  out.reserve(sets.size());
  if (mode == CombineMode::Join) {
    std::vector<std::string> texts;
    texts.reserve(sets.size());
    for (const auto& s : sets) texts.push_back(labelset_to_text(s));
    for (auto& v : embedder.embed(texts)) out.push_back(std::move(v.values));
    return out;
  }

  std::vector<std::vector<std::string>> per_set;
  std::vector<std::string> texts;
  for (const auto& s : sets) {
    auto labels = trimmed_labels(s);
    std::sort(labels.begin(), labels.end());
    texts.insert(texts.end(), labels.begin(), labels.end());
    per_set.push_back(std::move(labels));
  }
  const auto vectors = embedder.embed(texts);
  std::size_t k = 0;
  for (const auto& labels : per_set) {
    std::vector<double> sum(vectors[k].values.size(), 0.0);
    for (std::size_t j = 0; j < labels.size(); ++j, ++k) {
      for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += vectors[k].values[d];
    }
    const double n = static_cast<double>(labels.size());
    for (double& x : sum) x /= n;
    out.push_back(normalize(sum));
  }
  return out;
}

}  // namespace

std::map<std::string, std::vector<double>> embed_label_sets(
    std::span<const GeneratedLabelSet> sets, Embedder& embedder, CombineMode mode) {
  auto vectors = embed_sets_in_order(sets, embedder, mode);
  std::map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    out.insert_or_assign(sets[i].report_id, std::move(vectors[i]));
  }
  return out;
}

double gpt_sim(const GeneratedLabelSet& a, const GeneratedLabelSet& b, Embedder& embedder,
               CombineMode mode) {
  const GeneratedLabelSet both[] = {a, b};
  const auto vectors = embed_sets_in_order(both, embedder, mode);
  return cosine(vectors[0], vectors[1]);
}

}  // namespace radsim
