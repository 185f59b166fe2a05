#include "radsim/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "radsim/config.hpp"
#include "radsim/gt_similarity.hpp"
#include "radsim/hashing.hpp"
#include "radsim/llm_labeling.hpp"
#include "radsim/reporting.hpp"

namespace radsim {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Writes through a temporary file so readers never see a half-written file.
void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path, std::string_view stage) {
  if (!fs::exists(path)) {
    throw Error(ErrorKind::MissingPrerequisite,
                fmt::format("{} not found; run `radsim {}` first", path.string(), stage));
  }
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MissingPrerequisite,
                fmt::format("{} is unreadable ({}); rerun `radsim {}`", path.string(), e.what(),
                            stage));
  }
}

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

std::size_t as_size(std::int64_t v, std::string_view key) {
  if (v < 0) throw Error(ErrorKind::InvalidConfig, fmt::format("{} must be >= 0", key));
  return static_cast<std::size_t>(v);
}

// Reports named by the manifest, in manifest order, after checking the
// inputs did not change since ingest.
std::vector<Report> manifest_reports(const RunConfig& config, const json& manifest) {
  const std::string content = read_file(config.reports);
  if (manifest.at("inputs").at("reports_sha256").get<std::string>() != sha256_hex(content)) {
    throw Error(ErrorKind::MissingPrerequisite,
                config.reports.string() + " changed since ingest; rerun `radsim ingest`");
  }
  std::map<std::string, Report> by_id;
  for (auto& r : parse_reports(content)) by_id.emplace(r.report_id, std::move(r));
  std::vector<Report> out;
  for (const auto& id : manifest.at("retained")) {
    const auto it = by_id.find(id.get<std::string>());
    if (it == by_id.end()) {
      throw Error(ErrorKind::MissingPrerequisite,
                  "manifest names unknown report " + id.get<std::string>());
    }
    out.push_back(it->second);
  }
  return out;
}

TaskDefinition task_from_json(const json& j) {
  return {j.at("task_id").get<std::string>(), j.at("name").get<std::string>(),
          j.at("instruction").get<std::string>(), j.value("audience", "")};
}

json task_to_json(const TaskDefinition& t) {
  return {{"task_id", t.task_id},
          {"name", t.name},
          {"instruction", t.instruction},
          {"audience", t.audience}};
}

}  // namespace

RunConfig RunConfig::load(const fs::path& path, const Overrides& overrides) {
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "config file not found: " + path.string());
  const Config c = Config::load(path);
  const fs::path base = fs::absolute(path).parent_path();
  RunConfig rc;

  auto required_path = [&](std::string_view key) {
    auto v = c.get_string(key);
    if (!v) throw Error(ErrorKind::InvalidConfig, fmt::format("missing '{}'", key));
    return resolve(base, *v);
  };
  rc.reports = required_path("paths.reports");
  rc.chexpert = required_path("paths.chexpert");
  rc.negbio = required_path("paths.negbio");
  rc.prompts_dir = resolve(base, c.get_string("paths.prompts_dir", "prompts"));
  rc.output_dir = resolve(base, c.get_string("paths.output_dir", "out"));
  rc.cache_dir = c.has("paths.cache_dir") ? resolve(base, *c.get_string("paths.cache_dir"))
                                          : rc.output_dir / "cache";

  if (overrides.seed) {
    rc.seed = *overrides.seed;
  } else {
    if (!c.has("seed")) throw Error(ErrorKind::InvalidConfig, "config has no 'seed'");
    const auto seed = c.get_int("seed", 0);
    if (seed < 0 || seed > 0xFFFFFFFFLL) {
      throw Error(ErrorKind::InvalidConfig, "seed must fit in 32 unsigned bits");
    }
    rc.seed = static_cast<std::uint32_t>(seed);
  }
  if (c.has("group_size")) rc.group_size = as_size(c.get_int("group_size", 0), "group_size");
  rc.schema = FindingSchema::from_config(c, "schema.");

  rc.chat_provider = overrides.provider.value_or(c.get_string("chat.provider", "mock"));
  if (c.has("chat.lexicon")) rc.lexicon = resolve(base, *c.get_string("chat.lexicon"));
  rc.chat.endpoint = c.get_string("chat.endpoint", rc.chat.endpoint);
  rc.chat.model = c.get_string("chat.model", rc.chat.model);
  rc.chat.temperature = c.get_double("chat.temperature", rc.chat.temperature);
  rc.chat.max_retries = static_cast<int>(c.get_int("chat.max_retries", rc.chat.max_retries));
  rc.chat.timeout = std::chrono::milliseconds(
      static_cast<std::int64_t>(c.get_double("chat.timeout_seconds", 60.0) * 1000.0));
  rc.chat.api_key_env = c.get_string("chat.api_key_env", rc.chat.api_key_env);
  rc.task_pattern = c.get_string("chat.task_pattern", rc.task_pattern);
  rc.sample_size = as_size(c.get_int("chat.sample_size", 4), "chat.sample_size");

  rc.embedding_kind = overrides.embedder.value_or(c.get_string("embedding.kind", "hashed"));
  rc.embedding_dimension = as_size(c.get_int("embedding.dimension", 256), "embedding.dimension");
  rc.hash_seed = as_size(c.get_int("embedding.hash_seed", 0), "embedding.hash_seed");
  rc.embedding_url = c.get_string("embedding.url", "");
  if (c.has("embedding.file")) rc.embedding_file = resolve(base, *c.get_string("embedding.file"));
  rc.combine_mode = parse_combine_mode(c.get_string("embedding.combine_mode", "join"));

  rc.bleu.max_n = static_cast<int>(c.get_int("metrics.bleu_max_n", 4));
  rc.bleu.smoothing = c.get_bool("metrics.bleu_smoothing", false);
  rc.bleu.epsilon = c.get_double("metrics.bleu_epsilon", 1e-9);
  rc.difference_mode = parse_difference_mode(c.get_string("metrics.difference_mode", "absolute"));
  rc.hex_radius = c.get_double("metrics.hex_radius", 0.05);
  rc.min_count = as_size(c.get_int("metrics.min_count", 100), "metrics.min_count");

  rc.label_requests = as_size(c.get_int("concurrency.label_requests", 4), "label_requests");
  rc.embed_batches = as_size(c.get_int("concurrency.embed_batches", 4), "embed_batches");
  rc.embed_batch_size = as_size(c.get_int("concurrency.embed_batch_size", 64), "embed_batch_size");
  rc.scoring_workers = as_size(c.get_int("concurrency.scoring_workers", 4), "scoring_workers");

  if (overrides.output_dir) {
    rc.output_dir = fs::absolute(*overrides.output_dir).lexically_normal();
    if (!overrides.cache_dir && !c.has("paths.cache_dir")) rc.cache_dir = rc.output_dir / "cache";
  }
  if (overrides.cache_dir) rc.cache_dir = fs::absolute(*overrides.cache_dir).lexically_normal();

  if (rc.chat_provider != "mock" && rc.chat_provider != "http") {
    throw Error(ErrorKind::InvalidConfig, "chat provider must be mock or http, got '" +
                                              rc.chat_provider + "'");
  }
  if (rc.embedding_kind != "hashed" && rc.embedding_kind != "http" &&
      rc.embedding_kind != "file") {
    throw Error(ErrorKind::InvalidConfig, "embedder must be hashed, http or file, got '" +
                                              rc.embedding_kind + "'");
  }
  if (rc.bleu.max_n < 1) throw Error(ErrorKind::InvalidConfig, "bleu_max_n must be >= 1");
  if (!(rc.hex_radius > 0.0)) throw Error(ErrorKind::InvalidConfig, "hex_radius must be > 0");
  rc.chat.validate();
  return rc;
}

void RunConfig::validate() const {
  auto need = [](const fs::path& p, std::string_view what) {
    if (!fs::exists(p)) {
      throw Error(ErrorKind::Io, fmt::format("{} not found: {}", what, p.string()));
    }
  };
  need(reports, "reports file");
  need(chexpert, "CheXpert label file");
  need(negbio, "NegBio label file");
  need(prompts_dir, "prompts directory");
  if (chat_provider == "mock") {
    if (lexicon.empty()) throw Error(ErrorKind::InvalidConfig, "mock provider needs chat.lexicon");
    need(lexicon, "mock lexicon");
  }
  if (embedding_kind == "file") {
    if (embedding_file.empty()) {
      throw Error(ErrorKind::InvalidConfig, "file embedder needs embedding.file");
    }
    need(embedding_file, "embedding file");
  }
  if (embedding_kind == "http" && embedding_url.empty()) {
    throw Error(ErrorKind::InvalidConfig, "http embedder needs embedding.url");
  }
}

std::unique_ptr<ChatProvider> make_chat_provider(const RunConfig& config) {
  if (config.chat_provider == "http") return std::make_unique<HttpChatProvider>(config.chat);
  return std::make_unique<MockChatProvider>(MockLexicon::load(config.lexicon), "mock-lexicon",
                                            config.chat.temperature);
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunConfig& config) {
  if (config.embedding_kind == "http") {
    HttpEmbedderConfig hc;
    hc.url = config.embedding_url;
    hc.max_retries = config.chat.max_retries;
    hc.timeout = config.chat.timeout;
    return std::make_unique<HttpEmbedder>(hc);
  }
  if (config.embedding_kind == "file") {
    return std::make_unique<PrecomputedFileEmbedder>(config.embedding_file);
  }
  return std::make_unique<HashedEmbedder>(config.embedding_dimension, config.hash_seed);
}

IngestResult cmd_ingest(const RunConfig& config) {
  config.validate();
  const std::string content = read_file(config.reports);
  const auto reports = parse_reports(content);
  const auto chex = load_finding_vectors(config.chexpert, config.schema, LabelSource::CheXpert);
  const auto neg = load_finding_vectors(config.negbio, config.schema, LabelSource::NegBio);
  const FilterResult filtered = filter_no_finding_only(reports, chex, neg, config.schema);
  const PairSet groups = split_groups(filtered.retained, config.seed, config.group_size);

  std::vector<std::string> retained;
  for (const auto& r : filtered.retained) retained.push_back(r.report_id);
  const std::size_t pairs = groups.group_a.size() * groups.group_b.size();

  json m;
  m["seed"] = config.seed;
  m["inputs"] = {{"reports_sha256", sha256_hex(content)},
                 {"chexpert_sha256", sha256_hex(read_file(config.chexpert))},
                 {"negbio_sha256", sha256_hex(read_file(config.negbio))}};
  m["retained"] = retained;
  m["excluded_no_finding"] = filtered.excluded;
  m["dropped_missing_labels"] = filtered.dropped_missing_labels;
  m["group_a"] = groups.group_a;
  m["group_b"] = groups.group_b;
  m["dropped_for_even_split"] = groups.dropped ? json(*groups.dropped) : json(nullptr);
  m["counts"] = {{"total", reports.size()},
                 {"retained", retained.size()},
                 {"excluded_no_finding", filtered.excluded.size()},
                 {"dropped_missing_labels", filtered.dropped_missing_labels.size()},
                 {"group_a", groups.group_a.size()},
                 {"group_b", groups.group_b.size()},
                 {"pairs", pairs}};
  write_file(config.manifest_path(), m.dump(2) + "\n");

  spdlog::info("ingest: {} reports, {} retained, {} excluded as No Finding only, {} pairs",
               reports.size(), retained.size(), filtered.excluded.size(), pairs);
  return {reports.size(), retained.size(), filtered.excluded.size(),
          filtered.dropped_missing_labels.size(), pairs};
}

LabelResult cmd_label(const RunConfig& config, ChatProvider* provider) {
  config.validate();
  const json manifest = read_json(config.manifest_path(), "ingest");
  const auto reports = manifest_reports(config, manifest);
  if (reports.empty()) throw Error(ErrorKind::EmptyCorpus, "manifest retains no reports");

  std::unique_ptr<ChatProvider> owned;
  if (!provider) {
    owned = make_chat_provider(config);
    provider = owned.get();
  }
  // Counts requests through this stage, whatever the provider is.
  class Counting : public ChatProvider {
   public:
    explicit Counting(ChatProvider& inner) : inner_(inner) {}
    std::string complete(const ChatRequest& r) override {
      ++calls;
      return inner_.complete(r);
    }
    std::string model() const override { return inner_.model(); }
    double temperature() const override { return inner_.temperature(); }
    std::atomic<std::size_t> calls{0};

   private:
    ChatProvider& inner_;
  } counting(*provider);

  const PromptTemplates prompts = PromptTemplates::load(config.prompts_dir);
  LabelCache cache(config.label_cache_path());
  LabelingContext ctx{counting, prompts, cache};

  const std::size_t n_sample = std::min(std::max<std::size_t>(config.sample_size, 1),
                                        reports.size());
  const std::span<const Report> sample(reports.data(), n_sample);
  json identifications = json::object();
  for (const auto& r : sample) identifications[r.report_id] = identify_text(ctx, r);

  const auto tasks = generate_tasks(ctx, sample);
  const TaskDefinition& task = select_task(tasks, config.task_pattern);
  spdlog::info("label: task '{}' selected from {} generated", task.name, tasks.size());

  const LabelingOutcome outcome = label_corpus(ctx, reports, task, config.label_requests);

  json doc;
  doc["identifications"] = identifications;
  doc["tasks"] = json::array();
  for (const auto& t : tasks) doc["tasks"].push_back(task_to_json(t));
  doc["selected_task"] = task_to_json(task);
  doc["model"] = counting.model();
  doc["temperature"] = counting.temperature();
  doc["labeled"] = outcome.labels.size();
  doc["failures"] = outcome.failures;
  write_file(config.labeling_path(), doc.dump(2) + "\n");

  for (const auto& [id, message] : outcome.failures) spdlog::error("label {}: {}", id, message);
  spdlog::info("label: {}/{} reports labeled, {} failed, {} provider calls",
               outcome.labels.size(), reports.size(), outcome.failures.size(),
               counting.calls.load());
  return {outcome.labels.size(), outcome.failures.size(), counting.calls.load()};
}

ScoreResult cmd_score(const RunConfig& config, EmbeddingProvider* provider) {
  config.validate();
  const json manifest = read_json(config.manifest_path(), "ingest");
  const json labeling = read_json(config.labeling_path(), "label");
  const auto reports = manifest_reports(config, manifest);
  const TaskDefinition task = task_from_json(labeling.at("selected_task"));
  const std::string model = labeling.at("model").get<std::string>();
  const double temperature = labeling.at("temperature").get<double>();

  const PromptTemplates prompts = PromptTemplates::load(config.prompts_dir);
  const LabelCache label_cache(config.label_cache_path());
  std::vector<GeneratedLabelSet> sets;
  std::vector<std::string> missing;
  for (const auto& r : reports) {
    if (auto set = cached_labels(label_cache, prompts, r, task, model, temperature)) {
      sets.push_back(std::move(*set));
    } else {
      missing.push_back(r.report_id);
    }
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::MissingPrerequisite,
                fmt::format("{} of {} reports have no cached labels (first: {}); run "
                            "`radsim label` first",
                            missing.size(), reports.size(), missing.front()));
  }

  ScoringInputs inputs;
  inputs.bleu = config.bleu;
  std::set<std::string> wanted;
  for (const auto& r : reports) {
    inputs.add_report(r);
    wanted.insert(r.report_id);
  }
  for (LabelSource source : kAllSources) {
    const auto& path = source == LabelSource::CheXpert ? config.chexpert : config.negbio;
    for (const auto& v : load_finding_vectors(path, config.schema, source)) {
      if (wanted.contains(v.report_id)) inputs.encodings.add(encode_vector(v, config.schema));
    }
  }

  std::unique_ptr<EmbeddingProvider> owned;
  if (!provider) {
    owned = make_embedding_provider(config);
    provider = owned.get();
  }
  EmbeddingCache embedding_cache(config.embedding_cache_path());
  Embedder embedder(*provider, embedding_cache,
                    {config.embed_batch_size, config.embed_batches});
  inputs.label_embeddings = embed_label_sets(sets, embedder, config.combine_mode);
  embedding_cache.compact();

  PairSet groups;
  groups.group_a = manifest.at("group_a").get<std::vector<std::string>>();
  groups.group_b = manifest.at("group_b").get<std::vector<std::string>>();
  groups = cross_pairs(std::move(groups));

  const ScoreRun run = run_all(groups.pairs, inputs, config.scoring_workers);
  std::ostringstream out;
  write_scores_csv(out, run.scores);
  write_file(config.scores_path(), out.str());

  for (const auto& f : run.failures) spdlog::error("score {}/{}: {}", f.a_id, f.b_id, f.message);
  spdlog::info("score: {} pairs scored, {} failed, {} texts sent to the embedder",
               run.scores.size(), run.failures.size(), embedder.provider_texts());
  return {run.scores.size(), run.failures.size(), embedder.provider_texts()};
}

ReportResult cmd_report(const RunConfig& config) {
  if (!fs::exists(config.scores_path())) {
    throw Error(ErrorKind::MissingPrerequisite,
                config.scores_path().string() + " not found; run `radsim score` first");
  }
  const auto scores = read_scores_csv(config.scores_path());
  if (scores.empty()) throw Error(ErrorKind::NoValidPairs, "scores file has no pairs");
  const SummaryTable table = summarize(scores, config.difference_mode);

  std::ostringstream summary_csv;
  write_summary_csv(summary_csv, table);
  write_file(config.output_dir / "summary.csv", summary_csv.str());
  write_file(config.report_dir() / "summary.md", render_summary_markdown(table));

  ReportResult result;
  for (Method m : kAllMethods) {
    for (LabelSource source : kAllSources) {
      const HexbinLayer layer = hexbin(scores, m, source, config.hex_radius, config.min_count);
      const std::string stem = fmt::format("hexbin_{}_{}", slug(m), slug(source));
      std::ostringstream csv;
      write_hexbin_csv(csv, layer);
      write_file(config.output_dir / (stem + ".csv"), csv.str());

      const fs::path svg = config.report_dir() / (stem + ".svg");
      if (layer.bins.empty()) {
        spdlog::warn("report: {} vs {} has no bin above min_count {}; no figure written",
                     to_string(m), to_string(source), config.min_count);
        fs::remove(svg);
        ++result.skipped_layers;
        continue;
      }
      write_file(svg, render_hexbin_svg(layer, PlotSpec::for_layer(layer)));
      ++result.svgs;
    }
  }
  spdlog::info("report: summary written, {} figures, {} empty layers skipped", result.svgs,
               result.skipped_layers);
  return result;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::MissingColumn:
    case ErrorKind::DuplicateReportId:
    case ErrorKind::EmptyText:
    case ErrorKind::UnknownLabelColumn:
    case ErrorKind::InvalidCellValue:
    case ErrorKind::MissingReportId:
    case ErrorKind::EmptyCorpus:
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidN:
    case ErrorKind::SchemaMismatch:
    case ErrorKind::InvalidArgument:
      return kExitInput;
    case ErrorKind::MissingPrerequisite:
    case ErrorKind::MissingLabelSet:
    case ErrorKind::MissingEncoding:
      return kExitPrerequisite;
    case ErrorKind::NoValidPairs:
    case ErrorKind::TooFewValues:
    case ErrorKind::EmptyLayer:
    case ErrorKind::ZeroVector:
    case ErrorKind::OverlappingGroups:
    case ErrorKind::IncompleteTable:
      return kExitDegenerate;
    case ErrorKind::ProviderError:
    case ErrorKind::RateLimited:
    case ErrorKind::UnparseableResponse:
    case ErrorKind::NoMatch:
    case ErrorKind::AmbiguousMatch:
    case ErrorKind::EmptyLabelList:
    case ErrorKind::EmptyLabelSet:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NormalizationFailure:
      return kExitProvider;
    default:
      return kExitUnexpected;
  }
}

}  // namespace radsim
