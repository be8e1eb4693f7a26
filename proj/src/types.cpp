#include "kka/types.hpp"

#include <stdexcept>

namespace kka {

std::string to_string(Label label) {
  switch (label) {
    case Label::normal:
      return "normal";
    case Label::true_anomaly:
      return "true_anomaly";
    case Label::generated_anomaly:
      return "generated_anomaly";
  }
  return "normal";
}

std::string to_string(Hardness hardness) {
  switch (hardness) {
    case Hardness::unknown:
      return "unknown";
    case Hardness::easy:
      return "easy";
    case Hardness::hard:
      return "hard";
  }
  return "unknown";
}

Label label_from_string(const std::string& s) {
  if (s == "normal") return Label::normal;
  if (s == "true_anomaly") return Label::true_anomaly;
  if (s == "generated_anomaly") return Label::generated_anomaly;
  throw std::invalid_argument("unknown label: " + s);
}

Hardness hardness_from_string(const std::string& s) {
  if (s == "unknown") return Hardness::unknown;
  if (s == "easy") return Hardness::easy;
  if (s == "hard") return Hardness::hard;
  throw std::invalid_argument("unknown hardness: " + s);
}

std::vector<Vec> features_of(const std::vector<Sample>& samples) {
  std::vector<Vec> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.features);
  return out;
}

}  // namespace kka
