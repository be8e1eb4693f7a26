#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kka/common.hpp"

namespace kka {

struct HttpClientConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  double timeout_s = 30.0;
  std::size_t max_attempts = 3;
  double backoff_base_s = 0.5;  // doubled per retry
  std::size_t max_in_flight = 4;
  std::size_t expected_dim = 0;  // renderer responses must have this many features
};

// Transport-level failure after exhausting retries.
class NetworkError : public std::runtime_error {
 public:
  NetworkError(const std::string& msg, std::size_t attempts)
      : std::runtime_error(msg), attempts_(attempts) {}
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

// Well-formed transport, malformed payload.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerateResult {
  std::vector<std::string> completions;
  bool partial = false;  // server returned fewer than requested
  std::size_t attempts = 1;
};

// POST {base_url}/generate with {"prompt", "n", "max_tokens", "temperature"};
// expects {"completions": [...strings...]}.
GenerateResult external_generate(const HttpClientConfig& config,
                                 const std::string& prompt, std::size_t n,
                                 std::size_t max_tokens, double temperature);

// POST {base_url}/render with {"text"}; expects {"features": [...reals...]}.
// Validates finiteness and, when expected_dim is set, the dimension.
Vec external_render(const HttpClientConfig& config, const std::string& text);

// Renders many texts with at most config.max_in_flight concurrent requests.
std::vector<Vec> external_render_batch(const HttpClientConfig& config,
                                       const std::vector<std::string>& texts);

}  // namespace kka
