#pragma once

#include <cstdint>
#include <string>

#include "kka/linalg.hpp"
#include "kka/types.hpp"

namespace kka {

// Token prototypes: one feature-space vector per vocabulary entry. Row 0 is
// reserved for the UNK token and stays zero.
struct PrototypeTable {
  Mat prototypes;  // V x d
  double noise_sigma = 0.0;

  std::size_t vocab_size() const { return prototypes.rows(); }
  std::size_t dim() const { return prototypes.cols(); }

  bool operator==(const PrototypeTable&) const = default;
};

// Mean of the sequence's token prototypes plus isotropic Gaussian noise.
Vec render(const PrototypeTable& table, const TokenSequence& seq,
           std::uint64_t seed);

// Text/token to feature map. The prototype table is the reference
// implementation; an HTTP-backed renderer plugs in behind the same
// interface.
class Renderer {
 public:
  virtual ~Renderer() = default;
  virtual Vec render_tokens(const TokenSequence& seq,
                            std::uint64_t seed) const = 0;
  virtual std::size_t feature_dim() const = 0;
};

class PrototypeRenderer final : public Renderer {
 public:
  explicit PrototypeRenderer(PrototypeTable table) : table_(std::move(table)) {}

  Vec render_tokens(const TokenSequence& seq,
                    std::uint64_t seed) const override {
    return render(table_, seq, seed);
  }
  std::size_t feature_dim() const override { return table_.dim(); }

  const PrototypeTable& table() const { return table_; }

 private:
  PrototypeTable table_;
};

}  // namespace kka
