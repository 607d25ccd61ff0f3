// Serves the fixture articles and HTTP routes until killed; prints the base URL.
#include <chrono>
#include <iostream>
#include <thread>

#include "fixture_server.hpp"

int main() {
  using namespace chemhop::testing;
  FixtureServer server;
  server.set_articles(read_json(fixture_dir() / "articles.json").at("items"));
  server.load_routes(fixture_dir() / "http" / "routes.json");
  std::cout << server.url() << std::endl;
  for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}
