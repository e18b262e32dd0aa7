#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dcsr/corpus.hpp"

namespace dcsr {

using Vector = std::vector<double>;

inline constexpr std::size_t kDefaultDim = 64;
inline constexpr std::size_t kDefaultFeatureSpace = std::size_t{1} << 15;
inline constexpr double kDefaultContextBlend = 0.7;
inline constexpr double kDefaultInitScale = 4.0;
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Sparse feature vector, indices strictly increasing.
struct SparseFeatures {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t size() const { return index.size(); }
  bool operator==(const SparseFeatures&) const = default;
};

/// Hashed byte-trigram counts of the normalized text, L2-normalized.
/// feature_space must be a power of two. Throws EmptyText.
SparseFeatures trigram_features(std::string_view text, std::size_t feature_space);

/// alpha * local + (1 - alpha) * context.
SparseFeatures blend(const SparseFeatures& local, double alpha,
                     const SparseFeatures& context);

/// Per-sentence features with the whole-passage features blended in.
std::vector<SparseFeatures> contextual_features(const Passage& passage,
                                                std::size_t feature_space,
                                                double alpha);

enum class InitMode {
  /// Both towers start from the same matrix, the analogue of two encoders
  /// initialized from one pretrained checkpoint.
  Tied,
  Independent,
};

/// Two linear towers over hashed trigram features. Projections are stored
/// feature-major: the dim-long column for feature f starts at f * dim.
struct EncoderParams {
  std::size_t dim = kDefaultDim;
  std::size_t feature_space = kDefaultFeatureSpace;
  double context_blend = kDefaultContextBlend;
  std::uint64_t seed = 0;
  std::vector<double> question_projection;
  std::vector<double> context_projection;

  static EncoderParams initialize(std::size_t dim, std::size_t feature_space,
                                  double context_blend, std::uint64_t seed,
                                  InitMode mode = InitMode::Tied,
                                  double init_scale = kDefaultInitScale);

  std::span<const double> question_column(std::uint32_t feature) const {
    return {question_projection.data() + std::size_t{feature} * dim, dim};
  }
  std::span<const double> context_column(std::uint32_t feature) const {
    return {context_projection.data() + std::size_t{feature} * dim, dim};
  }

  /// Row-major (dim x F) accessors.
  double& question_at(std::size_t row, std::size_t feature) {
    return question_projection[feature * dim + row];
  }
  double& context_at(std::size_t row, std::size_t feature) {
    return context_projection[feature * dim + row];
  }

  void validate() const;
};

/// W x features, where W is a feature-major projection.
Vector project(std::span<const double> projection, std::size_t dim,
               const SparseFeatures& features);

Vector encode_question(std::string_view question, const EncoderParams& params);
std::vector<Vector> encode_passage(const Passage& passage, const EncoderParams& params);

/// Inner product. Throws DimensionError.
double sim(std::span<const double> a, std::span<const double> b);

enum class CandidateOrigin : std::uint8_t {
  InBatchGold,
  Bm25Negative,
  InPassageNegative,
};

/// n questions against m >= n shared candidates; the first n candidates are
/// the in-batch golds in question order.
struct LossBatch {
  std::vector<Vector> question_vecs;
  std::vector<Vector> candidate_vecs;
  std::vector<std::size_t> gold_index;
  std::vector<CandidateOrigin> candidate_origin;

  void validate() const;
};

/// Row-major n x m similarity matrix.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

ScoreMatrix similarities(const LossBatch& batch);

/// Mean over questions of -log softmax(gold). Throws NumericalError on
/// non-finite scores.
double loss(const LossBatch& batch);
double loss_from_scores(const ScoreMatrix& scores, std::span<const std::size_t> gold);

/// d loss / d score[i][j] = (softmax_ij - [j == gold_i]) / n.
ScoreMatrix score_gradient(const ScoreMatrix& scores, std::span<const std::size_t> gold);

/// A LossBatch before encoding: features for every question and candidate.
struct TrainingBatch {
  std::vector<SparseFeatures> question_features;
  std::vector<SparseFeatures> candidate_features;
  std::vector<std::size_t> gold_index;
  std::vector<CandidateOrigin> candidate_origin;
};

LossBatch encode_batch(const TrainingBatch& batch, const EncoderParams& params);

/// Gradient with the shape of both projections, stored as the touched
/// feature columns only (ordered by feature).
struct ParamGradient {
  std::size_t dim = 0;
  std::map<std::uint32_t, std::vector<double>> question;
  std::map<std::uint32_t, std::vector<double>> context;

  double question_at(std::size_t row, std::uint32_t feature) const;
  double context_at(std::size_t row, std::uint32_t feature) const;
  double squared_norm() const;
};

struct LossAndGradient {
  double loss = 0.0;
  ParamGradient gradient;
};

LossAndGradient loss_gradient(const TrainingBatch& batch, const EncoderParams& params);

/// params -= learning_rate * gradient
void apply_gradient(EncoderParams& params, const ParamGradient& gradient,
                    double learning_rate);

/// "DCSR" | version u32 | dim u32 | F u32 | alpha f64 | Wq | Wc, row-major
/// dim x F f64, little-endian.
void save_params(const std::filesystem::path& path, const EncoderParams& params);
EncoderParams load_params(const std::filesystem::path& path);
/// Also rejects a checkpoint whose dim or feature space differ.
EncoderParams load_params(const std::filesystem::path& path, std::size_t dim,
                          std::size_t feature_space);

}  // namespace dcsr
