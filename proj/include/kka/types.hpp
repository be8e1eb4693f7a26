#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kka/common.hpp"

namespace kka {

struct TokenSequence {
  std::vector<int> tokens;

  bool operator==(const TokenSequence&) const = default;
  std::size_t size() const { return tokens.size(); }
};

enum class Label { normal, true_anomaly, generated_anomaly };
enum class Hardness { unknown, easy, hard };

std::string to_string(Label label);
std::string to_string(Hardness hardness);
Label label_from_string(const std::string& s);
Hardness hardness_from_string(const std::string& s);

// One dataset record: a feature vector plus optional token description.
struct Sample {
  std::uint64_t id = 0;
  Label label = Label::normal;
  Hardness hardness = Hardness::unknown;
  Vec features;
  std::optional<TokenSequence> description;
};

std::vector<Vec> features_of(const std::vector<Sample>& samples);

}  // namespace kka
