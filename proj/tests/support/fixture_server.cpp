#include "fixture_server.hpp"

#include <httplib.h>

#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace chemhop::testing {

struct FixtureServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mu;
  json articles = json::array();
  std::map<std::string, json> routes;
  std::map<std::string, long> hits;
  long total = 0;
  int fail_count = 0;
  int fail_status = 500;
  std::function<FixtureServer::Reply(const FixtureServer::Exchange&)> post;
};

FixtureServer::FixtureServer() : impl_(std::make_unique<Impl>()) {
  auto* impl = impl_.get();
  impl->server.Get(".*", [impl](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(impl->mu);
    ++impl->total;
    ++impl->hits[req.path];
    if (impl->fail_count > 0) {
      --impl->fail_count;
      res.status = impl->fail_status;
      res.set_content("{\"error\":\"scripted\"}", "application/json");
      return;
    }
    if (req.path == "/articles") {
      std::size_t page = req.has_param("page") ? std::stoul(req.get_param_value("page")) : 0;
      std::size_t limit = req.has_param("limit") ? std::stoul(req.get_param_value("limit")) : 50;
      json items = json::array();
      for (std::size_t i = page * limit; i < impl->articles.size() && i < (page + 1) * limit; ++i) {
        items.push_back(impl->articles[i]);
      }
      res.set_content(json{{"page", page}, {"items", items}}.dump(), "application/json");
      return;
    }
    auto it = impl->routes.find(req.path);
    if (it == impl->routes.end()) {
      res.status = 404;
      res.set_content("{\"error\":\"not found\"}", "application/json");
      return;
    }
    const json& r = it->second;
    if (r.contains("redirect")) {
      res.status = 302;
      res.set_header("Location", r["redirect"].get<std::string>());
      return;
    }
    res.status = r.value("status", 200);
    const json& body = r.contains("body") ? r["body"] : json::object();
    res.set_content(body.is_string() ? body.get<std::string>() : body.dump(), "application/json");
  });
  impl->server.Post(".*", [impl](const httplib::Request& req, httplib::Response& res) {
    std::function<Reply(const Exchange&)> fn;
    {
      std::lock_guard lock(impl->mu);
      ++impl->total;
      ++impl->hits[req.path];
      if (impl->fail_count > 0) {
        --impl->fail_count;
        res.status = impl->fail_status;
        res.set_content("{\"error\":\"scripted\"}", "application/json");
        return;
      }
      fn = impl->post;
    }
    if (!fn) {
      res.status = 404;
      return;
    }
    Exchange ex{req.path, req.body, {}};
    for (const auto& [k, v] : req.headers) ex.headers[k] = v;
    Reply r = fn(ex);
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, "application/json");
  });
  impl->port = impl->server.bind_to_any_port("127.0.0.1");
  if (impl->port <= 0) throw std::runtime_error("fixture server could not bind");
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

FixtureServer::~FixtureServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int FixtureServer::port() const { return impl_->port; }
std::string FixtureServer::url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

void FixtureServer::set_articles(json items) {
  std::lock_guard lock(impl_->mu);
  impl_->articles = std::move(items);
}

void FixtureServer::load_routes(const std::filesystem::path& file) {
  json j = read_json(file);
  std::lock_guard lock(impl_->mu);
  for (auto& [path, r] : j.at("routes").items()) impl_->routes[path] = r;
}

void FixtureServer::add_route(const std::string& path, int status, json body) {
  std::lock_guard lock(impl_->mu);
  impl_->routes[path] = json{{"status", status}, {"body", std::move(body)}};
}

void FixtureServer::add_redirect(const std::string& from, const std::string& to) {
  std::lock_guard lock(impl_->mu);
  impl_->routes[from] = json{{"redirect", to}};
}

void FixtureServer::on_post(std::function<Reply(const Exchange&)> fn) {
  std::lock_guard lock(impl_->mu);
  impl_->post = std::move(fn);
}

void FixtureServer::fail_next(int n, int status) {
  std::lock_guard lock(impl_->mu);
  impl_->fail_count = n;
  impl_->fail_status = status;
}

long FixtureServer::requests() const {
  std::lock_guard lock(impl_->mu);
  return impl_->total;
}

long FixtureServer::requests_to(const std::string& path) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->hits.find(path);
  return it == impl_->hits.end() ? 0 : it->second;
}

std::filesystem::path fixture_dir() { return CHEMHOP_FIXTURES; }

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return json::parse(in);
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("chemhop-" + tag + "-" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace chemhop::testing
