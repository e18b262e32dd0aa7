#include "dcsr/trainer.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "dcsr/errors.hpp"
#include "dcsr/rng.hpp"

namespace dcsr {

namespace {

bool drawable(const QAExample& e) {
  return !e.bm25_negatives.empty() &&
         std::any_of(e.positives.begin(), e.positives.end(), [](const Passage& p) { return has_answer_sentence(p); });
}

std::vector<const QAExample*> drawable_examples(const std::vector<QAExample>& set) {
  std::vector<const QAExample*> out;
  for (const auto& e : set) {
    if (drawable(e)) out.push_back(&e);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::RangeError, "learning rate must be finite and non-negative");
  }
  if (epochs < 1) fail(ErrorKind::RangeError, "epochs must be at least 1");
  if (batch_size < 1) fail(ErrorKind::RangeError, "batch size must be at least 1");
  if (validation_pool_questions < 1) fail(ErrorKind::RangeError, "validation pool needs at least one question");
}

std::string epoch_record_json(const EpochRecord& record) {
  nlohmann::json j{{"epoch", record.epoch},
                   {"mean_loss", record.mean_loss},
                   {"steps", record.steps},
                   {"skipped_examples", record.skipped_examples},
                   {"duplicate_positive_passages", record.duplicate_positive_passages}};
  j["validation_accuracy"] =
      record.validation_accuracy ? nlohmann::json(*record.validation_accuracy) : nlohmann::json(nullptr);
  return j.dump();
}

std::vector<QAExample> concatenate_datasets(std::vector<std::vector<QAExample>> members, std::uint64_t seed) {
  std::vector<QAExample> out;
  for (auto& m : members) {
    for (auto& e : m) out.push_back(std::move(e));
  }
  Rng rng(seed);
  shuffle(std::span<QAExample>(out), rng);
  return out;
}

std::vector<TrainingBatch> validation_batches(const std::vector<QAExample>& dev_set, std::size_t pool_questions,
                                              std::size_t feature_space, double alpha, std::uint64_t seed) {
  const auto examples = drawable_examples(dev_set);
  FeatureCache cache(feature_space, alpha);
  const SamplingStrategy strategy{SamplingVariant::OneBm25Random, seed};
  const Rng root(seed);
  std::vector<TrainingBatch> pools;
  for (std::size_t begin = 0, chunk = 0; begin < examples.size(); begin += pool_questions, ++chunk) {
    const std::size_t end = std::min(examples.size(), begin + pool_questions);
    Rng rng = root.split(chunk);
    const std::span<const QAExample* const> slice(examples.data() + begin, end - begin);
    pools.push_back(featurize(build_batch(slice, strategy, rng), cache));
  }
  return pools;
}

double validation_accuracy(std::span<const LossBatch> pools) {
  std::size_t questions = 0;
  std::size_t hits = 0;
  for (const auto& pool : pools) {
    if (pool.candidate_vecs.empty()) continue;
    pool.validate();
    for (std::size_t i = 0; i < pool.question_vecs.size(); ++i) {
      const auto& q = pool.question_vecs[i];
      const std::size_t gold = pool.gold_index[i];
      const double gold_score = sim(q, pool.candidate_vecs[gold]);
      bool strict_max = true;
      for (std::size_t j = 0; j < pool.candidate_vecs.size() && strict_max; ++j) {
        if (j != gold && sim(q, pool.candidate_vecs[j]) >= gold_score) strict_max = false;
      }
      ++questions;
      hits += strict_max ? 1 : 0;
    }
  }
  if (questions == 0) fail(ErrorKind::EmptyPool, "validation pool is empty");
  return static_cast<double>(hits) / static_cast<double>(questions);
}

double validation_accuracy(std::span<const TrainingBatch> pools, const EncoderParams& params) {
  std::vector<LossBatch> encoded;
  encoded.reserve(pools.size());
  for (const auto& p : pools) encoded.push_back(encode_batch(p, params));
  return validation_accuracy(std::span<const LossBatch>(encoded));
}

TrainReport train(const std::vector<QAExample>& train_set, const std::vector<QAExample>& dev_set,
                  const TrainConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  const auto examples = drawable_examples(train_set);
  const std::size_t skipped = train_set.size() - examples.size();
  if (examples.empty()) fail(ErrorKind::InsufficientNegatives, "no trainable example in the training set");
  if (skipped > 0) spdlog::warn("skipping {} training examples without BM25 negatives", skipped);

  EncoderParams params = config.initial ? *config.initial
                                        : EncoderParams::initialize(config.dim, config.feature_space,
                                                                    config.context_blend, config.seed, config.init,
                                                                    config.init_scale);
  params.validate();

  FeatureCache cache(params.feature_space, params.context_blend);
  const auto dev_pools = validation_batches(dev_set, config.validation_pool_questions, params.feature_space,
                                            params.context_blend, config.seed ^ 0x5eed5eed5eedULL);

  TrainReport report;
  std::optional<std::ofstream> log;
  if (config.out_dir) {
    std::filesystem::create_directories(*config.out_dir);
    log.emplace(*config.out_dir / "report.jsonl", std::ios::trunc);
    report.final_checkpoint = *config.out_dir / "final.ckpt";
    if (!dev_pools.empty()) report.best_checkpoint = *config.out_dir / "best.ckpt";
  }

  auto consider_best = [&](double accuracy) {
    if (!report.best_validation_accuracy || accuracy > *report.best_validation_accuracy) {
      report.best_validation_accuracy = accuracy;
      report.best_params = params;
      if (report.best_checkpoint) save_params(*report.best_checkpoint, params);
    }
  };

  const Rng root(config.seed);
  std::vector<std::size_t> order(examples.size());
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = root.split(2 * epoch);
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    Rng draw_rng = root.split(2 * epoch + 1);
    const SamplingStrategy strategy{config.strategy.variant, config.seed};

    EpochRecord record;
    record.epoch = epoch + 1;
    record.skipped_examples = skipped;
    double loss_sum = 0.0;
    std::vector<const QAExample*> batch_examples;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch_examples.clear();
      for (std::size_t i = begin; i < end; ++i) batch_examples.push_back(examples[order[i]]);
      const BatchPlan plan = build_batch(std::span<const QAExample* const>(batch_examples), strategy, draw_rng);
      record.duplicate_positive_passages += plan.duplicate_positive_passages;

      try {
        const TrainingBatch batch = featurize(plan, cache);
        const LossAndGradient step = loss_gradient(batch, params);
        if (!std::isfinite(step.loss) || !std::isfinite(step.gradient.squared_norm())) {
          fail(ErrorKind::NumericalError, "non-finite loss or gradient at step " + std::to_string(global_step));
        }
        apply_gradient(params, step.gradient, config.learning_rate);
        loss_sum += step.loss;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NumericalError && report.final_checkpoint) {
          save_params(*report.final_checkpoint, params);
          spdlog::error("training aborted; last good parameters kept in {}", report.final_checkpoint->string());
        }
        throw;
      }
      ++record.steps;
      ++global_step;
      if (config.eval_every > 0 && global_step % config.eval_every == 0 && !dev_pools.empty()) {
        consider_best(validation_accuracy(dev_pools, params));
      }
    }
    record.mean_loss = loss_sum / static_cast<double>(record.steps);
    if (!dev_pools.empty()) {
      record.validation_accuracy = validation_accuracy(dev_pools, params);
      consider_best(*record.validation_accuracy);
    }
    spdlog::info("epoch {} loss {:.6f} val_acc {}", record.epoch, record.mean_loss,
                 record.validation_accuracy ? std::to_string(*record.validation_accuracy) : "n/a");
    if (log) *log << epoch_record_json(record) << '\n' << std::flush;
    report.epochs.push_back(record);
  }

  if (report.final_checkpoint) save_params(*report.final_checkpoint, params);
  if (!report.best_validation_accuracy) report.best_params = params;
  report.final_params = std::move(params);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace dcsr
