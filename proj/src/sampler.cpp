#include "dcsr/sampler.hpp"

#include <unordered_set>

#include "dcsr/errors.hpp"

namespace dcsr {

namespace {

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[static_cast<std::size_t>(rng.below(items.size()))];
}

std::size_t pick_index(std::size_t count, Rng& rng) { return static_cast<std::size_t>(rng.below(count)); }

SentenceDraw random_sentence(const Passage& passage, CandidateOrigin origin, Rng& rng) {
  return {&passage, pick_index(passage.sentences.size(), rng), origin};
}

// `count` BM25 sentences, from distinct negative passages while enough exist.
void draw_bm25(const QAExample& example, std::size_t count, Rng& rng, std::vector<SentenceDraw>& out) {
  const auto& negatives = example.bm25_negatives;
  if (negatives.empty()) {
    fail(ErrorKind::InsufficientNegatives, "question has no BM25 negative passage: " + example.question);
  }
  std::vector<std::size_t> available(negatives.size());
  for (std::size_t i = 0; i < available.size(); ++i) available[i] = i;
  for (std::size_t k = 0; k < count; ++k) {
    if (available.empty()) {
      available.resize(negatives.size());
      for (std::size_t i = 0; i < available.size(); ++i) available[i] = i;
    }
    const std::size_t slot = pick_index(available.size(), rng);
    const Passage& passage = negatives[available[slot]];
    available.erase(available.begin() + static_cast<std::ptrdiff_t>(slot));
    out.push_back(random_sentence(passage, CandidateOrigin::Bm25Negative, rng));
  }
}

}  // namespace

std::size_t SamplingStrategy::hard_negatives() const {
  switch (variant) {
    case SamplingVariant::OneBm25Random: return 1;
    case SamplingVariant::TwoBm25Random: return 2;
    case SamplingVariant::InPassagePlusBm25: return 2;
  }
  return 0;
}

std::string_view to_string(SamplingVariant variant) {
  switch (variant) {
    case SamplingVariant::OneBm25Random: return "bm25x1";
    case SamplingVariant::TwoBm25Random: return "bm25x2";
    case SamplingVariant::InPassagePlusBm25: return "inpassage+bm25";
  }
  return "unknown";
}

std::optional<SamplingVariant> parse_variant(std::string_view name) {
  if (name == "bm25x1") return SamplingVariant::OneBm25Random;
  if (name == "bm25x2") return SamplingVariant::TwoBm25Random;
  if (name == "inpassage+bm25") return SamplingVariant::InPassagePlusBm25;
  return std::nullopt;
}

DrawnSample draw(const QAExample& example, const SamplingStrategy& strategy, Rng& rng) {
  std::vector<const Passage*> eligible;
  for (const auto& p : example.positives) {
    if (has_answer_sentence(p)) eligible.push_back(&p);
  }
  if (eligible.empty()) {
    fail(ErrorKind::RangeError, "question has no answer-bearing positive: " + example.question);
  }

  DrawnSample sample;
  const Passage& positive = *pick(eligible, rng);
  std::vector<std::size_t> gold;
  std::vector<std::size_t> non_gold;
  for (const auto& s : positive.sentences) (s.contains_answer ? gold : non_gold).push_back(s.ordinal);
  sample.positive = {&positive, pick(gold, rng), CandidateOrigin::InBatchGold};

  switch (strategy.variant) {
    case SamplingVariant::OneBm25Random:
      draw_bm25(example, 1, rng, sample.hard_negatives);
      break;
    case SamplingVariant::TwoBm25Random:
      draw_bm25(example, 2, rng, sample.hard_negatives);
      break;
    case SamplingVariant::InPassagePlusBm25:
      if (non_gold.empty()) {
        sample.fallback_used = true;
        draw_bm25(example, 2, rng, sample.hard_negatives);
      } else {
        sample.hard_negatives.push_back({&positive, pick(non_gold, rng), CandidateOrigin::InPassageNegative});
        draw_bm25(example, 1, rng, sample.hard_negatives);
      }
      break;
  }
  return sample;
}

BatchPlan build_batch(std::span<const QAExample* const> examples, const SamplingStrategy& strategy, Rng& rng) {
  if (examples.empty()) fail(ErrorKind::RangeError, "batch needs at least one question");
  BatchPlan plan;
  std::vector<DrawnSample> samples;
  samples.reserve(examples.size());
  for (const auto* e : examples) samples.push_back(draw(*e, strategy, rng));

  std::unordered_set<std::string> positive_passages;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    plan.questions.push_back(examples[i]);
    plan.candidates.push_back(samples[i].positive);
    plan.gold_index.push_back(i);
    plan.fallback_used.push_back(samples[i].fallback_used);
    if (!positive_passages.insert(samples[i].positive.passage->id).second) ++plan.duplicate_positive_passages;
  }
  for (const auto& s : samples) {
    plan.candidates.insert(plan.candidates.end(), s.hard_negatives.begin(), s.hard_negatives.end());
  }
  return plan;
}

BatchPlan build_batch(std::span<const QAExample> examples, const SamplingStrategy& strategy, Rng& rng) {
  std::vector<const QAExample*> pointers;
  pointers.reserve(examples.size());
  for (const auto& e : examples) pointers.push_back(&e);
  return build_batch(std::span<const QAExample* const>(pointers), strategy, rng);
}

const SparseFeatures& FeatureCache::question(const QAExample& example) {
  auto it = questions_.find(example.question);
  if (it == questions_.end()) {
    it = questions_.emplace(example.question, trigram_features(example.question, feature_space_)).first;
  }
  return it->second;
}

const SparseFeatures& FeatureCache::sentence(const Passage& passage, std::size_t ordinal) {
  auto it = passages_.find(passage.id);
  if (it == passages_.end()) {
    it = passages_.emplace(passage.id, contextual_features(passage, feature_space_, alpha_)).first;
  }
  return it->second.at(ordinal);
}

TrainingBatch featurize(const BatchPlan& plan, FeatureCache& cache) {
  TrainingBatch batch;
  batch.question_features.reserve(plan.questions.size());
  for (const auto* q : plan.questions) batch.question_features.push_back(cache.question(*q));
  batch.candidate_features.reserve(plan.candidates.size());
  batch.candidate_origin.reserve(plan.candidates.size());
  for (const auto& c : plan.candidates) {
    batch.candidate_features.push_back(cache.sentence(*c.passage, c.ordinal));
    batch.candidate_origin.push_back(c.origin);
  }
  batch.gold_index = plan.gold_index;
  return batch;
}

LossBatch make_loss_batch(const BatchPlan& plan, const EncoderParams& params) {
  FeatureCache cache(params.feature_space, params.context_blend);
  return encode_batch(featurize(plan, cache), params);
}

}  // namespace dcsr
