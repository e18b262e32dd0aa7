#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dcsr/corpus.hpp"

namespace dcsr {

/// Synthetic corpus with controllable one-to-many structure. Every sentence
/// draws its words from one topic vocabulary and carries a unique answer
/// token; every question paraphrases one sentence of its passage.
struct SynthSpec {
  std::size_t passages = 500;
  std::size_t sentences_per_passage = 3;
  std::size_t topics = 3;
  /// Questions per passage -> probability.
  std::map<std::size_t, double> questions_per_passage{{3, 1.0}};
  std::uint64_t seed = 0;

  std::size_t vocabulary_per_topic = 200;
  std::size_t words_per_sentence = 8;
  std::size_t words_per_question = 5;

  void validate() const;
};

struct SynthCorpus {
  std::vector<Passage> passages;
  std::vector<QAExample> examples;
  /// Topic of every sentence, parallel to passages[i].sentences.
  std::vector<std::vector<std::size_t>> sentence_topics;
};

SynthCorpus synthesize(const SynthSpec& spec);

/// Parse "3:1.0" or "1:0.5,2:0.5". Throws SpecError.
std::map<std::size_t, double> parse_distribution(const std::string& text);

}  // namespace dcsr
