#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "kka/types.hpp"

namespace kka {

// word <-> token index mapping. Index 0 is the reserved UNK token.
struct Lexicon {
  std::vector<std::string> words;  // index -> word
  std::unordered_map<std::string, int> index;
  int unk = 0;

  static Lexicon from_words(std::vector<std::string> words);
  std::size_t size() const { return words.size(); }
};

// Whitespace tokenization against the lexicon; unknown words map to UNK.
// The result is truncated or UNK-padded to seq_len.
TokenSequence tokenize(const Lexicon& lexicon, const std::string& text,
                       std::size_t seq_len);

std::string detokenize(const Lexicon& lexicon, const TokenSequence& seq);

}  // namespace kka
