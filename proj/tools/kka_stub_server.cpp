// Deterministic stand-in for the external /generate and /render endpoints.
// Useful for exercising external-endpoint configs without real services.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "kka/common.hpp"

using nlohmann::json;

namespace {

// Completions cycle over a tiny fixed vocabulary, keyed by request count.
std::string make_completion(std::uint64_t salt, std::size_t max_tokens) {
  static const char* words[] = {"normal0", "normal1", "anomaly0",
                                "filler8", "filler9", "<unk>"};
  kka::Rng rng(kka::derive_seed(salt, "completion"));
  std::ostringstream out;
  for (std::size_t i = 0; i < max_tokens; ++i) {
    if (i > 0) out << ' ';
    out << words[rng.uniform_index(6)];
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  int port = 8787;
  int dim = 8;
  if (argc > 1) port = std::stoi(argv[1]);
  if (argc > 2) dim = std::stoi(argv[2]);

  httplib::Server server;
  std::uint64_t request_counter = 0;

  server.Post("/generate", [&](const httplib::Request& req,
                               httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("n")) {
      res.status = 400;
      res.set_content("{\"error\":\"bad request\"}", "application/json");
      return;
    }
    const std::size_t n = body.at("n").get<std::size_t>();
    const std::size_t max_tokens =
        body.value("max_tokens", static_cast<std::size_t>(4));
    json completions = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      completions.push_back(make_completion(++request_counter, max_tokens));
    }
    res.set_content(json{{"completions", completions}}.dump(),
                    "application/json");
  });

  server.Post("/render", [&](const httplib::Request& req,
                             httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("text")) {
      res.status = 400;
      res.set_content("{\"error\":\"bad request\"}", "application/json");
      return;
    }
    // Features are a seeded hash of the text: deterministic per input.
    const std::string text = body.at("text").get<std::string>();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    kka::Rng rng(h);
    json features = json::array();
    for (int i = 0; i < dim; ++i) features.push_back(rng.gaussian());
    res.set_content(json{{"features", features}}.dump(), "application/json");
  });

  std::cout << "stub server on 127.0.0.1:" << port << " (dim " << dim << ")\n";
  server.listen("127.0.0.1", port);
  return 0;
}
