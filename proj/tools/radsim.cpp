#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <exception>
#include <string>

#include "radsim/pipeline.hpp"

namespace {

int run(const std::string& stage, const radsim::RunConfig& config) {
  using namespace radsim;
  if (stage == "ingest" || stage == "run") cmd_ingest(config);
  if (stage == "label" || stage == "run") {
    const auto r = cmd_label(config);
    if (r.failed > 0) {
      spdlog::error("{} reports failed labeling; rerun `radsim label` to retry them", r.failed);
      return kExitProvider;
    }
  }
  if (stage == "score" || stage == "run") {
    const auto r = cmd_score(config);
    if (r.failed_pairs > 0) {
      spdlog::error("{} pairs could not be scored", r.failed_pairs);
      return kExitProvider;
    }
  }
  if (stage == "report" || stage == "run") cmd_report(config);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("radsim"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Label-mediated similarity evaluation for radiology reports"};
  app.require_subcommand(1);

  std::string config_path;
  radsim::Overrides overrides;
  std::uint32_t seed = 0;
  std::string provider, embedder, output_dir, cache_dir;
  bool verbose = false;

  for (const auto& [name, help] :
       {std::pair{"ingest", "Filter the corpus, split it and write manifest.json"},
        std::pair{"label", "Generate label sets for every retained report"},
        std::pair{"score", "Score every cross-group pair into scores.csv"},
        std::pair{"report", "Write the summary table and hexbin figures"},
        std::pair{"run", "ingest, label, score and report in sequence"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Run configuration (TOML)")->required();
    sub->add_option("--seed", seed, "Override the split seed");
    sub->add_option("--provider", provider, "Chat provider")
        ->check(CLI::IsMember({"mock", "http"}));
    sub->add_option("--embedder", embedder, "Embedding provider")
        ->check(CLI::IsMember({"hashed", "http", "file"}));
    sub->add_option("--output-dir", output_dir, "Override the output directory");
    sub->add_option("--cache-dir", cache_dir, "Override the cache directory");
    sub->add_flag("-v,--verbose", verbose, "Debug logging");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : radsim::kExitInput;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  const std::string stage = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) overrides.seed = seed;
  if (!provider.empty()) overrides.provider = provider;
  if (!embedder.empty()) overrides.embedder = embedder;
  if (!output_dir.empty()) overrides.output_dir = output_dir;
  if (!cache_dir.empty()) overrides.cache_dir = cache_dir;

  try {
    const auto config = radsim::RunConfig::load(config_path, overrides);
    return run(stage, config);
  } catch (const radsim::Error& e) {
    spdlog::error("{}", e.what());
    return radsim::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return radsim::kExitUnexpected;
  }
}
