#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcsr/corpus.hpp"
#include "dcsr/encoder.hpp"
#include "dcsr/index.hpp"

namespace dcsr {

/// Softmax with max subtraction. Throws NumericalError on non-finite input.
std::vector<double> normalize_scores(std::span<const double> scores);

/// 1 - prod(1 - p). Throws RangeError when any p is outside [0, 1].
double has_ans(std::span<const double> sentence_probs);

struct SentenceScore {
  std::uint32_t ordinal = 0;
  double score = 0.0;
  double probability = 0.0;
};

struct RankedPassage {
  std::string passage_id;
  double has_ans_probability = 0.0;
  /// Retrieved sentences of this passage in retrieval order.
  std::vector<SentenceScore> sentences;
};

struct RankedPassageList {
  std::string question_id;
  std::vector<RankedPassage> entries;
  std::size_t retrieved_sentences = 0;
  /// Fewer distinct passages survived grouping than were requested.
  bool shortfall = false;
};

/// Search top_m sentences, softmax over exactly those scores, group by
/// passage, HasAns per passage, sort by probability descending then id.
/// passage_limit = 0 keeps every passage.
RankedPassageList rank_passages(const SentenceIndex& index, std::span<const double> query,
                                std::size_t top_m, std::size_t passage_limit = 0,
                                std::string question_id = {});

/// Passage-granular baseline: one vector per passage (mean of its sentence
/// rows), ranked by raw inner product.
class PassageVectorIndex {
 public:
  explicit PassageVectorIndex(const SentenceIndex& sentences);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  /// Top passages by inner product, ties by id ascending.
  std::vector<std::pair<std::string, double>> rank(std::span<const double> query,
                                                   std::size_t top) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> vectors_;
  std::vector<std::size_t> id_rank_;
};

enum class Granularity { Sentence, Passage };

struct EvalOptions {
  std::vector<std::size_t> ks{1, 5, 20, 100};
  /// Sentence search depth; 0 means ceil(100 * avg sentences per passage).
  std::size_t depth = 0;
  Granularity granularity = Granularity::Sentence;
};

struct EvalReport {
  std::map<std::size_t, double> top_k_accuracy;
  std::size_t questions = 0;
  std::size_t corpus_sentences = 0;
  std::size_t shortfall_questions = 0;
};

std::string eval_report_json(const EvalReport& report);
EvalReport parse_eval_report(const std::string& json);

/// Top-k accuracy: a question scores at k when any of its k best passages
/// contains a gold answer. Passages missing from the store never match.
EvalReport evaluate(const std::vector<QAExample>& dataset, const SentenceIndex& index,
                    const EncoderParams& params, const PassageStore& store,
                    const EvalOptions& options = {});

enum class MiningMode { Replace, Augment };

struct MiningOptions {
  std::size_t per_question = 1;
  std::size_t depth = 0;
  MiningMode mode = MiningMode::Replace;
};

struct MiningResult {
  std::vector<QAExample> examples;
  std::size_t questions_without_mined = 0;
  std::size_t mined = 0;
};

/// For each question, walk its retrieved sentences best first, skip any
/// whose passage contains a gold answer, and turn the first per_question
/// survivors into single-sentence negatives.
MiningResult mine_hard_negatives(const std::vector<QAExample>& dataset,
                                 const SentenceIndex& index, const EncoderParams& params,
                                 const PassageStore& store, const MiningOptions& options);

struct FirstN {
  std::size_t n = 0;
};
struct Fraction {
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

/// Prefix take, or a seeded uniform sample of round(fraction * N) passages
/// kept in corpus order. Throws RangeError when the request is out of range.
std::vector<Passage> subsample_corpus(std::span<const Passage> passages, FirstN first);
std::vector<Passage> subsample_corpus(std::span<const Passage> passages, Fraction fraction);

}  // namespace dcsr
