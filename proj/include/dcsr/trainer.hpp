#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcsr/corpus.hpp"
#include "dcsr/encoder.hpp"
#include "dcsr/sampler.hpp"

namespace dcsr {

/// The reference setting is Adam at 2e-5 for 40 epochs with 16 questions per
/// device. The linear toy towers train with plain SGD, where 0.05 plays the
/// role of that rate.
struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  SamplingStrategy strategy{};
  /// Validation every this many steps in addition to each epoch end; 0 = epoch only.
  std::size_t eval_every = 0;
  std::uint64_t seed = 0;

  std::size_t dim = kDefaultDim;
  std::size_t feature_space = kDefaultFeatureSpace;
  double context_blend = kDefaultContextBlend;
  InitMode init = InitMode::Tied;
  double init_scale = kDefaultInitScale;
  /// Start from these params instead of a fresh initialization.
  std::optional<EncoderParams> initial;

  /// Questions per validation pool; with bm25x1 each pool holds twice as
  /// many candidate sentences (128 -> 256).
  std::size_t validation_pool_questions = 128;

  /// When set: final.ckpt, best.ckpt and report.jsonl are written here.
  std::optional<std::filesystem::path> out_dir;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> validation_accuracy;
  std::size_t steps = 0;
  std::size_t skipped_examples = 0;
  std::size_t duplicate_positive_passages = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  std::optional<std::filesystem::path> final_checkpoint;
  std::optional<std::filesystem::path> best_checkpoint;
  EncoderParams final_params;
  EncoderParams best_params;
  std::optional<double> best_validation_accuracy;
};

std::string epoch_record_json(const EpochRecord& record);

TrainReport train(const std::vector<QAExample>& train_set,
                  const std::vector<QAExample>& dev_set, const TrainConfig& config);

/// Multi regime: concatenation of member datasets shuffled with seed.
std::vector<QAExample> concatenate_datasets(std::vector<std::vector<QAExample>> members,
                                            std::uint64_t seed);

/// Validation pools: dev questions chunked by pool_questions, each chunk
/// drawn with bm25x1 so every question faces the pooled 2n candidates.
std::vector<TrainingBatch> validation_batches(const std::vector<QAExample>& dev_set,
                                              std::size_t pool_questions,
                                              std::size_t feature_space, double alpha,
                                              std::uint64_t seed);

/// Fraction of questions whose gold candidate has the strict maximum
/// similarity in its pool; ties count as misses. Throws EmptyPool.
double validation_accuracy(std::span<const LossBatch> pools);
double validation_accuracy(std::span<const TrainingBatch> pools,
                           const EncoderParams& params);

}  // namespace dcsr
