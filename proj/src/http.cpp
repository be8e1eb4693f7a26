#include "kka/http.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace kka {

namespace {

using nlohmann::json;

httplib::Client make_client(const HttpClientConfig& config) {
  httplib::Client client(config.base_url);
  const auto timeout = std::chrono::milliseconds(
      static_cast<long>(config.timeout_s * 1000.0));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

// POSTs the body, retrying transport failures and 5xx responses with
// exponential backoff. Returns the response body on HTTP 200.
std::string post_with_retries(const HttpClientConfig& config,
                              const std::string& path, const std::string& body,
                              std::size_t* attempts_out) {
  std::string last_error;
  const std::size_t max_attempts = std::max<std::size_t>(1, config.max_attempts);
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempts_out != nullptr) *attempts_out = attempt;
    httplib::Client client = make_client(config);
    auto res = client.Post(path, body, "application/json");
    if (res) {
      if (res->status == 200) return res->body;
      if (res->status >= 500) {
        last_error = "server returned status " + std::to_string(res->status);
      } else {
        throw ProtocolError(path + ": unexpected status " +
                            std::to_string(res->status));
      }
    } else {
      last_error = "transport error: " + httplib::to_string(res.error());
    }
    if (attempt < max_attempts) {
      const double delay =
          config.backoff_base_s * std::pow(2.0, static_cast<double>(attempt - 1));
      log_info("retrying " + path + " after " + last_error + " (attempt " +
               std::to_string(attempt) + ")");
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long>(delay * 1000.0)));
    }
  }
  throw NetworkError(path + " failed after " + std::to_string(max_attempts) +
                         " attempts: " + last_error,
                     max_attempts);
}

json parse_json(const std::string& path, const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    throw ProtocolError(path + ": response is not valid JSON");
  }
  return parsed;
}

}  // namespace

GenerateResult external_generate(const HttpClientConfig& config,
                                 const std::string& prompt, std::size_t n,
                                 std::size_t max_tokens, double temperature) {
  const json request = {{"prompt", prompt},
                        {"n", n},
                        {"max_tokens", max_tokens},
                        {"temperature", temperature}};
  GenerateResult result;
  const std::string body =
      post_with_retries(config, "/generate", request.dump(), &result.attempts);

  const json response = parse_json("/generate", body);
  if (!response.contains("completions") || !response["completions"].is_array()) {
    throw ProtocolError("/generate: missing completions array");
  }
  for (const json& item : response["completions"]) {
    if (!item.is_string()) {
      throw ProtocolError("/generate: completion entries must be strings");
    }
    result.completions.push_back(item.get<std::string>());
  }
  if (result.completions.size() < n) {
    result.partial = true;
    log_warn("/generate returned " + std::to_string(result.completions.size()) +
             " of " + std::to_string(n) + " requested completions");
  }
  return result;
}

Vec external_render(const HttpClientConfig& config, const std::string& text) {
  const json request = {{"text", text}};
  const std::string body =
      post_with_retries(config, "/render", request.dump(), nullptr);

  const json response = parse_json("/render", body);
  if (!response.contains("features") || !response["features"].is_array()) {
    throw ProtocolError("/render: missing features array");
  }
  Vec features;
  features.reserve(response["features"].size());
  for (const json& item : response["features"]) {
    if (!item.is_number()) {
      throw ProtocolError("/render: features must be numbers");
    }
    features.push_back(item.get<double>());
  }
  if (!all_finite(features)) {
    throw ProtocolError("/render: non-finite feature value");
  }
  if (config.expected_dim != 0 && features.size() != config.expected_dim) {
    throw ProtocolError("/render: got dimension " +
                        std::to_string(features.size()) + ", expected " +
                        std::to_string(config.expected_dim));
  }
  return features;
}

std::vector<Vec> external_render_batch(const HttpClientConfig& config,
                                       const std::vector<std::string>& texts) {
  std::vector<Vec> out(texts.size());
  std::vector<std::string> errors(texts.size());
  std::atomic<std::size_t> next{0};

  const std::size_t workers =
      std::min<std::size_t>(std::max<std::size_t>(1, config.max_in_flight),
                            texts.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < texts.size();
           i = next.fetch_add(1)) {
        try {
          out[i] = external_render(config, texts[i]);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();

  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw std::runtime_error("render of text " + std::to_string(i) +
                               " failed: " + errors[i]);
    }
  }
  return out;
}

}  // namespace kka
