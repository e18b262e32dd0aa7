#include "dcsr/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "dcsr/errors.hpp"
#include "dcsr/rng.hpp"
#include "dcsr/text.hpp"

namespace dcsr {

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'C', 'S', 'R'};

bool is_power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

void check_finite_row(std::span<const double> row, std::size_t r) {
  for (double v : row) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::NumericalError, "non-finite similarity in row " + std::to_string(r));
    }
  }
}

void accumulate_column(std::map<std::uint32_t, std::vector<double>>& columns, std::size_t dim,
                       const SparseFeatures& features, const Vector& direction) {
  for (std::size_t k = 0; k < features.size(); ++k) {
    const double weight = features.value[k];
    if (weight == 0.0) continue;
    auto [it, inserted] = columns.try_emplace(features.index[k]);
    if (inserted) it->second.assign(dim, 0.0);
    auto& column = it->second;
    for (std::size_t r = 0; r < dim; ++r) column[r] += weight * direction[r];
  }
}

double column_entry(const std::map<std::uint32_t, std::vector<double>>& columns, std::size_t row,
                    std::uint32_t feature) {
  auto it = columns.find(feature);
  return it == columns.end() ? 0.0 : it->second[row];
}

void write_matrix(detail::ByteWriter& w, const std::vector<double>& feature_major, std::size_t dim,
                  std::size_t features) {
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t f = 0; f < features; ++f) w.put<double>(feature_major[f * dim + r]);
  }
}

std::vector<double> read_matrix(detail::ByteReader& r, std::size_t dim, std::size_t features) {
  std::vector<double> out(dim * features);
  for (std::size_t row = 0; row < dim; ++row) {
    for (std::size_t f = 0; f < features; ++f) out[f * dim + row] = r.get<double>();
  }
  return out;
}

}  // namespace

SparseFeatures trigram_features(std::string_view text, std::size_t feature_space) {
  if (!is_power_of_two(feature_space)) {
    fail(ErrorKind::RangeError, "feature space must be a power of two");
  }
  const std::string normalized = normalize_text(text);
  if (normalized.empty()) fail(ErrorKind::EmptyText, "cannot encode empty text");

  const std::string padded = " " + normalized + " ";
  const auto mask = static_cast<std::uint64_t>(feature_space - 1);
  std::vector<std::uint32_t> hashed;
  hashed.reserve(padded.size());
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    hashed.push_back(static_cast<std::uint32_t>(fnv1a64(std::string_view(padded).substr(i, 3)) & mask));
  }
  std::sort(hashed.begin(), hashed.end());

  SparseFeatures out;
  for (std::size_t i = 0; i < hashed.size();) {
    std::size_t j = i;
    while (j < hashed.size() && hashed[j] == hashed[i]) ++j;
    out.index.push_back(hashed[i]);
    out.value.push_back(static_cast<double>(j - i));
    i = j;
  }
  double norm = 0.0;
  for (double v : out.value) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : out.value) v /= norm;
  return out;
}

SparseFeatures blend(const SparseFeatures& local, double alpha, const SparseFeatures& context) {
  if (alpha == 1.0) return local;
  if (alpha == 0.0) return context;
  SparseFeatures out;
  out.index.reserve(local.size() + context.size());
  out.value.reserve(local.size() + context.size());
  std::size_t a = 0;
  std::size_t b = 0;
  while (a < local.size() || b < context.size()) {
    if (b == context.size() || (a < local.size() && local.index[a] < context.index[b])) {
      out.index.push_back(local.index[a]);
      out.value.push_back(alpha * local.value[a]);
      ++a;
    } else if (a == local.size() || context.index[b] < local.index[a]) {
      out.index.push_back(context.index[b]);
      out.value.push_back((1.0 - alpha) * context.value[b]);
      ++b;
    } else {
      out.index.push_back(local.index[a]);
      out.value.push_back(alpha * local.value[a] + (1.0 - alpha) * context.value[b]);
      ++a;
      ++b;
    }
  }
  return out;
}

std::vector<SparseFeatures> contextual_features(const Passage& passage, std::size_t feature_space,
                                                double alpha) {
  if (passage.sentences.empty()) fail(ErrorKind::EmptyText, "passage " + passage.id + " has no sentences");
  std::string whole;
  for (const auto& s : passage.sentences) {
    if (!whole.empty()) whole.push_back(' ');
    whole += s.text;
  }
  SparseFeatures context;
  if (alpha != 1.0) context = trigram_features(whole, feature_space);
  std::vector<SparseFeatures> out;
  out.reserve(passage.sentences.size());
  for (const auto& s : passage.sentences) {
    if (alpha == 0.0) {
      out.push_back(context);
    } else {
      out.push_back(blend(trigram_features(s.text, feature_space), alpha, context));
    }
  }
  return out;
}

EncoderParams EncoderParams::initialize(std::size_t dim, std::size_t feature_space,
                                        double context_blend, std::uint64_t seed, InitMode mode,
                                        double init_scale) {
  EncoderParams p;
  p.dim = dim;
  p.feature_space = feature_space;
  p.context_blend = context_blend;
  p.seed = seed;
  // Uniform entries with variance scale^2 / dim, so unit-norm features map
  // to vectors of norm close to init_scale.
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) fail(ErrorKind::RangeError, "init scale must be positive");
  const double bound = init_scale * std::sqrt(3.0 / static_cast<double>(dim));
  auto fill = [&](std::vector<double>& m, Rng rng) {
    m.resize(dim * feature_space);
    for (auto& v : m) v = rng.uniform(-bound, bound);
  };
  const Rng root(seed);
  fill(p.question_projection, root.split(0));
  if (mode == InitMode::Tied) {
    p.context_projection = p.question_projection;
  } else {
    fill(p.context_projection, root.split(1));
  }
  p.validate();
  return p;
}

void EncoderParams::validate() const {
  if (dim == 0) fail(ErrorKind::RangeError, "encoder dim must be positive");
  if (!is_power_of_two(feature_space)) fail(ErrorKind::RangeError, "feature space must be a power of two");
  if (!(context_blend >= 0.0 && context_blend <= 1.0)) {
    fail(ErrorKind::RangeError, "context blend must lie in [0, 1]");
  }
  if (question_projection.size() != dim * feature_space || context_projection.size() != dim * feature_space) {
    fail(ErrorKind::DimensionError, "projection size does not match dim x feature space");
  }
}

Vector project(std::span<const double> projection, std::size_t dim, const SparseFeatures& features) {
  Vector out(dim, 0.0);
  for (std::size_t k = 0; k < features.size(); ++k) {
    const double weight = features.value[k];
    const double* column = projection.data() + std::size_t{features.index[k]} * dim;
    for (std::size_t r = 0; r < dim; ++r) out[r] += weight * column[r];
  }
  return out;
}

Vector encode_question(std::string_view question, const EncoderParams& params) {
  return project(params.question_projection, params.dim,
                 trigram_features(question, params.feature_space));
}

std::vector<Vector> encode_passage(const Passage& passage, const EncoderParams& params) {
  const auto features = contextual_features(passage, params.feature_space, params.context_blend);
  std::vector<Vector> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(project(params.context_projection, params.dim, f));
  return out;
}

double sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::DimensionError,
         "dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void LossBatch::validate() const {
  const std::size_t n = question_vecs.size();
  const std::size_t m = candidate_vecs.size();
  if (n == 0) fail(ErrorKind::RangeError, "loss batch has no questions");
  if (m < n) fail(ErrorKind::RangeError, "loss batch needs at least one candidate per question");
  if (gold_index.size() != n) fail(ErrorKind::RangeError, "gold_index must have one entry per question");
  if (candidate_origin.size() != m) fail(ErrorKind::RangeError, "candidate_origin must cover every candidate");
  std::vector<bool> used(m, false);
  for (auto g : gold_index) {
    if (g >= m || used[g]) fail(ErrorKind::RangeError, "gold indices must be distinct and in range");
    if (candidate_origin[g] != CandidateOrigin::InBatchGold) {
      fail(ErrorKind::RangeError, "gold candidate must be an in-batch gold");
    }
    used[g] = true;
  }
}

ScoreMatrix similarities(const LossBatch& batch) {
  batch.validate();
  ScoreMatrix s{batch.question_vecs.size(), batch.candidate_vecs.size(), {}};
  s.values.resize(s.rows * s.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < s.cols; ++j) s.at(i, j) = sim(batch.question_vecs[i], batch.candidate_vecs[j]);
  }
  return s;
}

double loss_from_scores(const ScoreMatrix& scores, std::span<const std::size_t> gold) {
  double total = 0.0;
  for (std::size_t i = 0; i < scores.rows; ++i) {
    const std::span<const double> row(scores.values.data() + i * scores.cols, scores.cols);
    check_finite_row(row, i);
    const double max = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double s : row) sum += std::exp(s - max);
    const double per_question = max + std::log(sum) - row[gold[i]];
    total += std::max(0.0, per_question);
  }
  return total / static_cast<double>(scores.rows);
}

double loss(const LossBatch& batch) { return loss_from_scores(similarities(batch), batch.gold_index); }

ScoreMatrix score_gradient(const ScoreMatrix& scores, std::span<const std::size_t> gold) {
  ScoreMatrix g{scores.rows, scores.cols, std::vector<double>(scores.values.size())};
  const double inv_n = 1.0 / static_cast<double>(scores.rows);
  for (std::size_t i = 0; i < scores.rows; ++i) {
    const std::span<const double> row(scores.values.data() + i * scores.cols, scores.cols);
    check_finite_row(row, i);
    const double max = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double s : row) sum += std::exp(s - max);
    for (std::size_t j = 0; j < scores.cols; ++j) {
      const double p = std::exp(row[j] - max) / sum;
      g.at(i, j) = (p - (j == gold[i] ? 1.0 : 0.0)) * inv_n;
    }
  }
  return g;
}

LossBatch encode_batch(const TrainingBatch& batch, const EncoderParams& params) {
  LossBatch out;
  out.question_vecs.reserve(batch.question_features.size());
  for (const auto& f : batch.question_features) {
    out.question_vecs.push_back(project(params.question_projection, params.dim, f));
  }
  out.candidate_vecs.reserve(batch.candidate_features.size());
  for (const auto& f : batch.candidate_features) {
    out.candidate_vecs.push_back(project(params.context_projection, params.dim, f));
  }
  out.gold_index = batch.gold_index;
  out.candidate_origin = batch.candidate_origin;
  return out;
}

double ParamGradient::question_at(std::size_t row, std::uint32_t feature) const {
  return column_entry(question, row, feature);
}

double ParamGradient::context_at(std::size_t row, std::uint32_t feature) const {
  return column_entry(context, row, feature);
}

double ParamGradient::squared_norm() const {
  double acc = 0.0;
  for (const auto* columns : {&question, &context}) {
    for (const auto& [f, column] : *columns) {
      for (double v : column) acc += v * v;
    }
  }
  return acc;
}

LossAndGradient loss_gradient(const TrainingBatch& batch, const EncoderParams& params) {
  const LossBatch encoded = encode_batch(batch, params);
  const ScoreMatrix scores = similarities(encoded);
  const ScoreMatrix residual = score_gradient(scores, encoded.gold_index);

  const std::size_t n = scores.rows;
  const std::size_t m = scores.cols;
  const std::size_t dim = params.dim;

  LossAndGradient out;
  out.loss = loss_from_scores(scores, encoded.gold_index);
  out.gradient.dim = dim;

  // d/dq_i = sum_j r_ij c_j and d/dc_j = sum_i r_ij q_i; each then spreads
  // over the feature columns that produced the vector.
  for (std::size_t i = 0; i < n; ++i) {
    Vector dq(dim, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double r = residual.at(i, j);
      const auto& c = encoded.candidate_vecs[j];
      for (std::size_t d = 0; d < dim; ++d) dq[d] += r * c[d];
    }
    accumulate_column(out.gradient.question, dim, batch.question_features[i], dq);
  }
  for (std::size_t j = 0; j < m; ++j) {
    Vector dc(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = residual.at(i, j);
      const auto& q = encoded.question_vecs[i];
      for (std::size_t d = 0; d < dim; ++d) dc[d] += r * q[d];
    }
    accumulate_column(out.gradient.context, dim, batch.candidate_features[j], dc);
  }
  return out;
}

void apply_gradient(EncoderParams& params, const ParamGradient& gradient, double learning_rate) {
  if (gradient.dim != params.dim) fail(ErrorKind::DimensionError, "gradient dim does not match params");
  const std::size_t dim = params.dim;
  for (const auto& [f, column] : gradient.question) {
    double* dst = params.question_projection.data() + std::size_t{f} * dim;
    for (std::size_t r = 0; r < dim; ++r) dst[r] -= learning_rate * column[r];
  }
  for (const auto& [f, column] : gradient.context) {
    double* dst = params.context_projection.data() + std::size_t{f} * dim;
    for (std::size_t r = 0; r < dim; ++r) dst[r] -= learning_rate * column[r];
  }
}

void save_params(const std::filesystem::path& path, const EncoderParams& params) {
  params.validate();
  detail::ByteWriter w;
  w.reserve(24 + 16 * params.dim * params.feature_space);
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.feature_space));
  w.put<double>(params.context_blend);
  write_matrix(w, params.question_projection, params.dim, params.feature_space);
  write_matrix(w, params.context_projection, params.dim, params.feature_space);
  detail::write_binary_file(path.string(), w.buffer());
}

EncoderParams load_params(const std::filesystem::path& path) {
  const std::string data = detail::read_binary_file(path.string(), ErrorKind::IncompatibleCheckpoint);
  detail::ByteReader r(data, ErrorKind::IncompatibleCheckpoint);
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) {
    fail(ErrorKind::IncompatibleCheckpoint, path.string() + ": not a checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::IncompatibleCheckpoint,
         path.string() + ": checkpoint version " + std::to_string(version) + " unsupported");
  }
  EncoderParams p;
  p.dim = r.get<std::uint32_t>();
  p.feature_space = r.get<std::uint32_t>();
  p.context_blend = r.get<double>();
  if (p.dim == 0 || !is_power_of_two(p.feature_space) || !(p.context_blend >= 0.0 && p.context_blend <= 1.0)) {
    fail(ErrorKind::IncompatibleCheckpoint, path.string() + ": invalid header");
  }
  if (r.remaining() != 16 * p.dim * p.feature_space) {
    fail(ErrorKind::IncompatibleCheckpoint, path.string() + ": payload size does not match header");
  }
  p.question_projection = read_matrix(r, p.dim, p.feature_space);
  p.context_projection = read_matrix(r, p.dim, p.feature_space);
  const auto finite = [](const std::vector<double>& m) {
    return std::all_of(m.begin(), m.end(), [](double v) { return std::isfinite(v); });
  };
  if (!finite(p.question_projection) || !finite(p.context_projection)) {
    fail(ErrorKind::IncompatibleCheckpoint, path.string() + ": non-finite weights");
  }
  return p;
}

EncoderParams load_params(const std::filesystem::path& path, std::size_t dim, std::size_t feature_space) {
  auto p = load_params(path);
  if (p.dim != dim || p.feature_space != feature_space) {
    fail(ErrorKind::IncompatibleCheckpoint,
         path.string() + ": checkpoint is " + std::to_string(p.dim) + "x" + std::to_string(p.feature_space) +
             ", expected " + std::to_string(dim) + "x" + std::to_string(feature_space));
  }
  return p;
}

}  // namespace dcsr
