#include "kka/lexicon.hpp"

#include <sstream>
#include <stdexcept>

namespace kka {

Lexicon Lexicon::from_words(std::vector<std::string> words) {
  Lexicon lex;
  lex.words = std::move(words);
  for (std::size_t i = 0; i < lex.words.size(); ++i) {
    lex.index[lex.words[i]] = static_cast<int>(i);
  }
  return lex;
}

TokenSequence tokenize(const Lexicon& lexicon, const std::string& text,
                       std::size_t seq_len) {
  if (seq_len == 0) {
    throw std::invalid_argument("tokenize: seq_len must be >= 1");
  }
  TokenSequence seq;
  seq.tokens.reserve(seq_len);
  std::istringstream in(text);
  std::string word;
  while (seq.tokens.size() < seq_len && in >> word) {
    const auto it = lexicon.index.find(word);
    seq.tokens.push_back(it == lexicon.index.end() ? lexicon.unk : it->second);
  }
  while (seq.tokens.size() < seq_len) seq.tokens.push_back(lexicon.unk);
  return seq;
}

std::string detokenize(const Lexicon& lexicon, const TokenSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const int t = seq.tokens[i];
    if (t < 0 || static_cast<std::size_t>(t) >= lexicon.words.size()) {
      throw std::invalid_argument("detokenize: token " + std::to_string(t) +
                                  " outside lexicon of size " +
                                  std::to_string(lexicon.words.size()));
    }
    if (i > 0) out += ' ';
    out += lexicon.words[static_cast<std::size_t>(t)];
  }
  return out;
}

}  // namespace kka
