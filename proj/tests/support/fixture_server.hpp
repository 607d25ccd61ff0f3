#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

namespace chemhop::testing {

using json = nlohmann::json;

/// Local HTTP server on 127.0.0.1 serving a paged article listing and a table
/// of canned responses keyed by decoded request path.
class FixtureServer {
 public:
  FixtureServer();
  ~FixtureServer();
  FixtureServer(const FixtureServer&) = delete;
  FixtureServer& operator=(const FixtureServer&) = delete;

  int port() const;
  std::string url() const;

  /// Serves GET /articles?page=P&limit=L over `items` (pages start at 0).
  void set_articles(json items);
  /// {"routes": {path: {"status", "body"} | {"redirect": path}}}
  void load_routes(const std::filesystem::path& file);
  void add_route(const std::string& path, int status, json body);
  void add_redirect(const std::string& from, const std::string& to);
  struct Exchange {
    std::string path;
    std::string body;
    std::map<std::string, std::string> headers;
  };
  struct Reply {
    int status = 200;
    std::string body;
    std::map<std::string, std::string> headers;
  };
  /// Every POST goes to `fn`; GET routes are unaffected.
  void on_post(std::function<Reply(const Exchange&)> fn);
  /// The next `n` requests to any path answer with `status`.
  void fail_next(int n, int status);

  long requests() const;
  long requests_to(const std::string& path) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::filesystem::path fixture_dir();
json read_json(const std::filesystem::path& p);
/// A fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

}  // namespace chemhop::testing
