#include "kka/renderer.hpp"

#include <stdexcept>
#include <string>

namespace kka {

Vec render(const PrototypeTable& table, const TokenSequence& seq,
           std::uint64_t seed) {
  if (seq.tokens.empty()) {
    throw std::invalid_argument("render: empty token sequence");
  }
  const std::size_t d = table.dim();
  Vec out(d, 0.0);
  for (int t : seq.tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= table.vocab_size()) {
      throw std::invalid_argument("render: token " + std::to_string(t) +
                                  " outside vocabulary of size " +
                                  std::to_string(table.vocab_size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      out[j] += table.prototypes(static_cast<std::size_t>(t), j);
    }
  }
  const double inv_l = 1.0 / static_cast<double>(seq.tokens.size());
  for (double& v : out) v *= inv_l;

  if (table.noise_sigma > 0.0) {
    Rng rng(seed);
    for (double& v : out) v += table.noise_sigma * rng.gaussian();
  }
  return out;
}

}  // namespace kka
