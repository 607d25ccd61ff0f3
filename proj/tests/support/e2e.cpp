#include "e2e.hpp"

#include <sys/wait.h>

#include <cstdlib>

#include "chemhop/io.hpp"

namespace chemhop::testing {

namespace fs = std::filesystem;

E2eRun::E2eRun(const std::string& tag) : dir_(scratch_dir(tag)) {
  server_.set_articles(read_json(fixture_dir() / "articles.json").at("items"));
  server_.load_routes(fixture_dir() / "http" / "routes.json");
  write_config(base_config());
}

E2eRun::~E2eRun() {
  std::error_code ec;
  fs::remove_all(dir_, ec);
}

json E2eRun::base_config() const {
  json cfg = read_json(fixture_dir() / "config.json");
  cfg["run_dir"] = run_dir().string();
  cfg["source"]["base_url"] = server_.url();
  cfg["enrich"]["wiki_url"] = server_.url();
  cfg["enrich"]["pubchem_url"] = server_.url();
  cfg["ner"]["lexicon"] = (fixture_dir() / "lexicon.txt").string();
  return cfg;
}

void E2eRun::write_config(const json& cfg) const { write_file_atomic(config(), cfg.dump(2)); }

int E2eRun::run(const std::string& args, std::string* out) const {
  const fs::path out_file = dir_ / "stdout.txt";
  std::string cmd = std::string("\"") + CHEMHOP_CLI_PATH + "\" --log-level error --config \"" + config().string() +
                    "\" --mock-llm \"" + (fixture_dir() / "mock_llm.json").string() + "\" " + args + " > \"" +
                    out_file.string() + "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
  int status = std::system(cmd.c_str());
  if (out) *out = read_file(out_file);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace chemhop::testing
