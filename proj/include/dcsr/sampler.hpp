#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dcsr/corpus.hpp"
#include "dcsr/encoder.hpp"
#include "dcsr/rng.hpp"

namespace dcsr {

enum class SamplingVariant {
  OneBm25Random,      // bm25x1
  TwoBm25Random,      // bm25x2
  InPassagePlusBm25,  // inpassage+bm25
};

struct SamplingStrategy {
  SamplingVariant variant = SamplingVariant::InPassagePlusBm25;
  std::uint64_t seed = 0;

  /// Hard negatives per question.
  std::size_t hard_negatives() const;
};

std::string_view to_string(SamplingVariant variant);
/// Accepts the CLI spellings bm25x1, bm25x2, inpassage+bm25.
std::optional<SamplingVariant> parse_variant(std::string_view name);

struct SentenceDraw {
  const Passage* passage = nullptr;
  std::size_t ordinal = 0;
  CandidateOrigin origin = CandidateOrigin::InBatchGold;

  SentenceRef ref() const { return {passage->id, ordinal}; }
  const Sentence& sentence() const { return passage->sentences[ordinal]; }
};

struct DrawnSample {
  SentenceDraw positive;
  std::vector<SentenceDraw> hard_negatives;
  bool fallback_used = false;
};

/// Positive: a uniform answer-bearing sentence of a uniform positive passage.
/// BM25 negatives: a uniform sentence of a uniform BM25 passage; bm25x2 takes
/// its two from different passages when at least two exist. The in-passage
/// negative is a uniform non-answer sentence of the positive's passage, or an
/// extra BM25 sentence when that passage has none (fallback_used).
/// Throws InsufficientNegatives when the example has no BM25 passage.
DrawnSample draw(const QAExample& example, const SamplingStrategy& strategy, Rng& rng);

/// Candidates are the n positives in example order followed by every hard
/// negative; gold_index(i) = i.
struct BatchPlan {
  std::vector<const QAExample*> questions;
  std::vector<SentenceDraw> candidates;
  std::vector<std::size_t> gold_index;
  std::vector<bool> fallback_used;
  /// Questions whose gold sentence comes from a passage already used as a
  /// positive by an earlier question of the same batch.
  std::size_t duplicate_positive_passages = 0;
};

BatchPlan build_batch(std::span<const QAExample* const> examples,
                      const SamplingStrategy& strategy, Rng& rng);
BatchPlan build_batch(std::span<const QAExample> examples,
                      const SamplingStrategy& strategy, Rng& rng);

/// Memoizes per-passage contextual features and per-question features.
class FeatureCache {
 public:
  FeatureCache(std::size_t feature_space, double alpha)
      : feature_space_(feature_space), alpha_(alpha) {}

  const SparseFeatures& question(const QAExample& example);
  const SparseFeatures& sentence(const Passage& passage, std::size_t ordinal);

 private:
  std::size_t feature_space_;
  double alpha_;
  std::unordered_map<std::string, SparseFeatures> questions_;
  std::unordered_map<std::string, std::vector<SparseFeatures>> passages_;
};

TrainingBatch featurize(const BatchPlan& plan, FeatureCache& cache);

/// Encode a plan under the given params.
LossBatch make_loss_batch(const BatchPlan& plan, const EncoderParams& params);

}  // namespace dcsr
