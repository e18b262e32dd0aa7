#include "dcsr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <span>
#include <sstream>

#include "dcsr/errors.hpp"
#include "dcsr/rng.hpp"

namespace dcsr {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::array<std::string_view, 4> kQuestionWords = {"What", "Which", "Who", "Where"};

// Answer tokens: fixed length, so no token is a substring of another, and
// the "qx" prefix never occurs in vocabulary words.
std::string answer_token(std::size_t serial) {
  constexpr std::size_t kSpace = 26ULL * 26 * 26 * 26 * 26;
  std::size_t code = (serial * 7919) % kSpace;
  std::string out = "qx";
  for (int i = 0; i < 5; ++i) {
    out.push_back(static_cast<char>('a' + code % 26));
    code /= 26;
  }
  return out;
}

std::vector<std::vector<std::string>> make_vocabularies(const SynthSpec& spec, const Rng& root) {
  std::set<std::string> used;
  std::vector<std::vector<std::string>> vocab(spec.topics);
  for (std::size_t t = 0; t < spec.topics; ++t) {
    Rng rng = root.split(1000 + t);
    while (vocab[t].size() < spec.vocabulary_per_topic) {
      const std::size_t syllables = 2 + static_cast<std::size_t>(rng.below(2));
      std::string word;
      for (std::size_t s = 0; s < syllables; ++s) {
        word.push_back(kConsonants[rng.below(kConsonants.size())]);
        word.push_back(kVowels[rng.below(kVowels.size())]);
      }
      if (used.insert(word).second) vocab[t].push_back(std::move(word));
    }
  }
  return vocab;
}

std::size_t sample_count(const std::map<std::size_t, double>& dist, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& [count, p] : dist) {
    acc += p;
    if (u < acc) return count;
  }
  // Rounding left u above the cumulative total; take the last nonzero bucket.
  for (auto it = dist.rbegin(); it != dist.rend(); ++it) {
    if (it->second > 0.0) return it->first;
  }
  return dist.rbegin()->first;
}

std::string capitalize(std::string word) {
  if (!word.empty() && word[0] >= 'a' && word[0] <= 'z') word[0] = static_cast<char>(word[0] - 'a' + 'A');
  return word;
}

}  // namespace

void SynthSpec::validate() const {
  if (passages < 1 || sentences_per_passage < 1 || topics < 1) {
    fail(ErrorKind::SpecError, "passages, sentences per passage and topics must be at least 1");
  }
  if (vocabulary_per_topic < 1 || words_per_sentence < 1 || words_per_question < 1) {
    fail(ErrorKind::SpecError, "vocabulary and word counts must be at least 1");
  }
  if (words_per_question > words_per_sentence) {
    fail(ErrorKind::SpecError, "a question cannot use more words than its sentence has");
  }
  if (questions_per_passage.empty()) fail(ErrorKind::SpecError, "questions-per-passage distribution is empty");
  double total = 0.0;
  for (const auto& [count, p] : questions_per_passage) {
    if (count < 1) fail(ErrorKind::SpecError, "questions per passage must be at least 1");
    if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorKind::SpecError, "distribution weights must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::SpecError, "distribution must sum to 1");
  // Words are drawn without replacement within one sentence.
  if (vocabulary_per_topic < words_per_sentence) {
    fail(ErrorKind::SpecError, "vocabulary per topic must cover a sentence");
  }
}

std::map<std::size_t, double> parse_distribution(const std::string& text) {
  std::map<std::size_t, double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) fail(ErrorKind::SpecError, "distribution entries look like count:probability");
    try {
      std::size_t used = 0;
      const auto count = std::stoul(item.substr(0, colon), &used);
      const double p = std::stod(item.substr(colon + 1));
      out[count] += p;
    } catch (const std::logic_error&) {
      fail(ErrorKind::SpecError, "cannot parse distribution entry '" + item + "'");
    }
  }
  SynthSpec check;
  check.questions_per_passage = out;
  check.validate();
  return out;
}

SynthCorpus synthesize(const SynthSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  const auto vocab = make_vocabularies(spec, root);

  SynthCorpus corpus;
  corpus.passages.reserve(spec.passages);
  corpus.sentence_topics.reserve(spec.passages);
  std::vector<std::vector<std::vector<std::string>>> sentence_words(spec.passages);
  std::vector<std::vector<std::string>> answers(spec.passages);

  Rng text_rng = root.split(1);
  std::size_t serial = 0;
  for (std::size_t p = 0; p < spec.passages; ++p) {
    std::vector<std::size_t> topics(spec.sentences_per_passage);
    if (spec.topics >= spec.sentences_per_passage) {
      std::vector<std::size_t> all(spec.topics);
      std::iota(all.begin(), all.end(), std::size_t{0});
      for (std::size_t s = 0; s < topics.size(); ++s) {
        const std::size_t j = s + static_cast<std::size_t>(text_rng.below(all.size() - s));
        std::swap(all[s], all[j]);
        topics[s] = all[s];
      }
    } else {
      const auto offset = static_cast<std::size_t>(text_rng.below(spec.topics));
      for (std::size_t s = 0; s < topics.size(); ++s) topics[s] = (offset + s) % spec.topics;
    }

    std::string text;
    for (std::size_t s = 0; s < spec.sentences_per_passage; ++s) {
      const auto& words = vocab[topics[s]];
      std::vector<std::size_t> pick(words.size());
      std::iota(pick.begin(), pick.end(), std::size_t{0});
      std::vector<std::string> chosen;
      for (std::size_t w = 0; w < spec.words_per_sentence; ++w) {
        const std::size_t j = w + static_cast<std::size_t>(text_rng.below(pick.size() - w));
        std::swap(pick[w], pick[j]);
        chosen.push_back(words[pick[w]]);
      }
      const std::string answer = answer_token(serial++);
      std::vector<std::string> sentence = chosen;
      const auto at = static_cast<std::ptrdiff_t>(text_rng.below(sentence.size() + 1));
      sentence.insert(sentence.begin() + at, answer);
      sentence.front() = capitalize(sentence.front());

      if (!text.empty()) text.push_back(' ');
      for (std::size_t w = 0; w < sentence.size(); ++w) {
        if (w > 0) text.push_back(' ');
        text += sentence[w];
      }
      text.push_back('.');
      sentence_words[p].push_back(std::move(chosen));
      answers[p].push_back(answer);
    }
    corpus.passages.push_back(make_passage("Synthetic passage " + std::to_string(p + 1), text));
    corpus.sentence_topics.push_back(std::move(topics));
  }

  Rng question_rng = root.split(2);
  for (std::size_t p = 0; p < spec.passages; ++p) {
    const std::size_t count = sample_count(spec.questions_per_passage, question_rng);
    std::vector<std::size_t> targets(spec.sentences_per_passage);
    std::iota(targets.begin(), targets.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(targets), question_rng);

    for (std::size_t q = 0; q < count; ++q) {
      const std::size_t target = targets[q % targets.size()];
      std::vector<std::string> words = sentence_words[p][target];
      shuffle(std::span<std::string>(words), question_rng);
      words.resize(spec.words_per_question);
      std::string question(kQuestionWords[question_rng.below(kQuestionWords.size())]);
      for (const auto& w : words) question += " " + w;
      question += "?";

      QAExample example;
      example.question = std::move(question);
      example.answers = {answers[p][target]};
      example.positives.push_back(label_answers(corpus.passages[p], example.answers));

      if (spec.passages > 1) {
        const std::size_t gold_topic = corpus.sentence_topics[p][target];
        std::size_t negative = p;
        for (int attempt = 0; attempt < 32; ++attempt) {
          const auto candidate = static_cast<std::size_t>(question_rng.below(spec.passages));
          if (candidate == p) continue;
          negative = candidate;
          const auto& topics = corpus.sentence_topics[candidate];
          if (std::find(topics.begin(), topics.end(), gold_topic) == topics.end()) break;
        }
        if (negative == p) negative = (p + 1) % spec.passages;
        example.bm25_negatives.push_back(label_answers(corpus.passages[negative], example.answers));
      }
      corpus.examples.push_back(std::move(example));
    }
  }
  return corpus;
}

}  // namespace dcsr
