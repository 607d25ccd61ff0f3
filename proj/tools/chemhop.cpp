// chemhop: knowledge-graph construction and multi-hop QA generation stages.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <map>

#include "chemhop/error.hpp"
#include "chemhop/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStage = 1;
constexpr int kExitConfig = 2;

const char* describe(const std::string& stage) {
  static const std::map<std::string, const char*> text = {
      {"ingest", "fetch articles and chunk their introductions"},
      {"extract-entities", "detect and verify chemical entities per chunk"},
      {"extract-relations", "extract (head, relation, tail) triplets per chunk"},
      {"enrich", "attach encyclopedia and compound metadata to entities"},
      {"build-graph", "assemble the knowledge graph"},
      {"graph-stats", "print network statistics as Markdown"},
      {"sample-paths", "sample k-hop paths with distinct edge sources"},
      {"gen-qa", "generate multi-hop questions from sampled paths"},
      {"verify-qa", "apply leak, length and answerability checks"},
      {"evaluate", "run models over the dataset with and without context"},
      {"report", "write result and dataset statistics tables"},
      {"annotate-import", "import expert ratings for dataset items"},
  };
  return text.at(stage);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chemistry knowledge graph and multi-hop QA pipeline"};
  app.require_subcommand(1);

  std::string config_path = "chemhop.json";
  std::string run_dir;
  std::string mock_llm;
  std::string log_level = "info";
  app.add_option("-c,--config", config_path, "Run configuration file")->capture_default_str();
  app.add_option("--run-dir", run_dir, "Override the configured run directory");
  app.add_option("--mock-llm", mock_llm, "Scripted responder file replacing every LLM provider");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string run_id;
  std::string input;
  std::string consensus_run;
  for (const auto& name : chemhop::pipeline::stage_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    if (name == "sample-paths") seed_opt = sub->add_option("--seed", seed, "Sampling seed (overrides sampler.seed)");
    if (name == "evaluate" || name == "report") sub->add_option("--run-id", run_id, "Evaluation run identifier");
    if (name == "annotate-import") sub->add_option("-f,--file", input, "Annotation records (JSONL)")->required();
    if (name == "verify-qa") {
      sub->add_option("--consensus-run", consensus_run,
                      "Drop dataset items no model answered correctly in this evaluation run");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  // Standard output carries the stage summary; logs go to standard error.
  spdlog::set_default_logger(spdlog::stderr_color_mt("chemhop"));
  auto level = spdlog::level::from_str(log_level);
  spdlog::set_level(level);
  spdlog::flush_on(spdlog::level::warn);

  auto* chosen = app.get_subcommands().front();
  const std::string stage = chosen->get_name();
  try {
    auto cfg = chemhop::pipeline::RunConfig::load(config_path);
    if (!run_dir.empty()) cfg.run_dir = run_dir;
    chemhop::pipeline::StageOptions opts;
    if (!mock_llm.empty()) opts.mock_llm = mock_llm;
    if (seed_opt && seed_opt->count() > 0) opts.seed = seed;
    if (!run_id.empty()) opts.run_id = run_id;
    if (!input.empty()) opts.input = input;
    if (!consensus_run.empty()) opts.consensus_run = consensus_run;

    chemhop::pipeline::Pipeline pipeline(std::move(cfg), std::move(opts));
    auto result = pipeline.run(stage);
    std::cout << result.summary;
    return kExitOk;
  } catch (const chemhop::Error& e) {
    std::cerr << "chemhop " << stage << ": " << e.what() << "\n";
    return e.code() == chemhop::ErrorCode::ConfigInvalid ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "chemhop " << stage << ": " << e.what() << "\n";
    return kExitStage;
  }
}
