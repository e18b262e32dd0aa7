#pragma once

// Reference implementations used by the unit and acceptance suites. They are
// written from the formulas, share no code with the library beyond its data
// types, and favour the most direct computation over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dcsr/corpus.hpp"
#include "dcsr/encoder.hpp"
#include "dcsr/index.hpp"

namespace oracle {

inline long double dot_ld(const std::vector<double>& a, const std::vector<double>& b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
  return acc;
}

// Mean of -log(exp(s_gold) / sum_j exp(s_j)), in extended precision without
// any shift: sizes in the tests keep the exponentials in range.
inline long double loss(const dcsr::LossBatch& batch) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < batch.question_vecs.size(); ++i) {
    long double denom = 0.0L;
    for (const auto& c : batch.candidate_vecs) denom += std::exp(dot_ld(batch.question_vecs[i], c));
    const long double gold = dot_ld(batch.question_vecs[i], batch.candidate_vecs[batch.gold_index[i]]);
    total += std::log(denom) - gold;
  }
  return total / static_cast<long double>(batch.question_vecs.size());
}

inline std::vector<long double> softmax(const std::vector<double>& scores) {
  long double top = scores.empty() ? 0.0L : *std::max_element(scores.begin(), scores.end());
  std::vector<long double> out;
  long double z = 0.0L;
  for (double s : scores) z += std::exp(static_cast<long double>(s) - top);
  for (double s : scores) out.push_back(std::exp(static_cast<long double>(s) - top) / z);
  return out;
}

inline long double has_ans(const std::vector<double>& probs) {
  long double miss = 1.0L;
  for (double p : probs) miss *= 1.0L - static_cast<long double>(p);
  return 1.0L - miss;
}

struct Ranked {
  std::string passage_id;
  long double probability = 0.0L;
};

// Score every row, full sort, softmax over the first top_m, noisy-OR per
// passage, sort by probability then id.
inline std::vector<Ranked> rank(const dcsr::SentenceIndex& index, const std::vector<double>& query,
                                std::size_t top_m) {
  struct Row {
    double score;
    const dcsr::SentenceKey* key;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < index.size(); ++i) {
    double s = 0.0;
    const auto r = index.row(i);
    for (std::size_t d = 0; d < index.dim(); ++d) s += static_cast<double>(r[d]) * query[d];
    rows.push_back({s, &index.keys()[i]});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    return *a.key < *b.key;
  });
  rows.resize(std::min(top_m, rows.size()));
  std::vector<double> scores;
  for (const auto& r : rows) scores.push_back(r.score);
  const auto p = softmax(scores);
  std::map<std::string, long double> miss;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto [it, fresh] = miss.try_emplace(rows[i].key->passage_id, 1.0L);
    it->second *= 1.0L - p[i];
  }
  std::vector<Ranked> out;
  for (const auto& [id, m] : miss) out.push_back({id, 1.0L - m});
  std::stable_sort(out.begin(), out.end(),
                   [](const Ranked& a, const Ranked& b) { return a.probability > b.probability; });
  return out;
}

inline std::string normalize_ascii(const std::string& s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n') {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// Upper tail of the chi-square distribution, through the series for the
// regularized lower incomplete gamma function.
inline double chi_square_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  const double a = df / 2.0, z = x / 2.0;
  double term = 1.0 / a, sum = term;
  for (int k = 1; k < 100000; ++k) {
    term *= z / (a + k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return 1.0 - std::exp(a * std::log(z) - z - std::lgamma(a)) * sum;
}

}  // namespace oracle

namespace testgen {

inline dcsr::SparseFeatures random_features(std::mt19937_64& gen, std::size_t feature_space, std::size_t nnz) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(feature_space - 1));
  std::uniform_real_distribution<double> val(0.1, 1.0);
  std::map<std::uint32_t, double> m;
  while (m.size() < nnz) m[pick(gen)] = val(gen);
  dcsr::SparseFeatures f;
  for (auto [i, v] : m) {
    f.index.push_back(i);
    f.value.push_back(v);
  }
  return f;
}

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t dim, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(dim);
  for (auto& x : v) x = n(gen);
  return v;
}

// n questions, n golds then k hard negatives.
inline dcsr::LossBatch random_loss_batch(std::mt19937_64& gen, std::size_t n, std::size_t k, std::size_t dim,
                                         double scale = 1.0) {
  dcsr::LossBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.question_vecs.push_back(random_vector(gen, dim, scale));
    b.gold_index.push_back(i);
  }
  for (std::size_t j = 0; j < n + k; ++j) {
    b.candidate_vecs.push_back(random_vector(gen, dim, scale));
    b.candidate_origin.push_back(j < n ? dcsr::CandidateOrigin::InBatchGold : dcsr::CandidateOrigin::Bm25Negative);
  }
  return b;
}

// Index with `passages` passages of 1..max_sentences rows each. Vectors are
// rounded to a coarse grid now and then so exact ties occur.
inline dcsr::SentenceIndex random_index(std::mt19937_64& gen, std::size_t passages, std::size_t max_sentences,
                                        std::size_t dim, bool with_ties = true) {
  std::uniform_int_distribution<std::size_t> count(1, max_sentences);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::bernoulli_distribution coarse(with_ties ? 0.3 : 0.0);
  std::vector<dcsr::SentenceKey> keys;
  std::vector<float> vectors;
  for (std::size_t p = 0; p < passages; ++p) {
    const std::size_t c = count(gen);
    const std::string id = "p" + std::to_string(p * 7919 % 100003);
    for (std::size_t s = 0; s < c; ++s) {
      keys.push_back({id, static_cast<std::uint32_t>(s)});
      const bool round = coarse(gen);
      for (std::size_t d = 0; d < dim; ++d) {
        float v = n(gen);
        vectors.push_back(round ? std::round(v) : v);
      }
    }
  }
  return dcsr::SentenceIndex(dim, std::move(keys), std::move(vectors));
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dcsr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testgen
