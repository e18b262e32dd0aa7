#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dcsr/corpus.hpp"
#include "dcsr/encoder.hpp"

namespace dcsr {

inline constexpr std::uint32_t kIndexVersion = 1;

struct SentenceKey {
  std::string passage_id;
  std::uint32_t ordinal = 0;

  bool operator==(const SentenceKey&) const = default;
  auto operator<=>(const SentenceKey&) const = default;
};

/// Flat sentence store: row i holds the vector of keys[i].
class SentenceIndex {
 public:
  SentenceIndex() = default;
  /// Throws DimensionError when vectors.size() != keys.size() * dim and
  /// RangeError on duplicate keys.
  SentenceIndex(std::size_t dim, std::vector<SentenceKey> keys, std::vector<float> vectors);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  const std::vector<SentenceKey>& keys() const { return keys_; }
  const std::vector<float>& vectors() const { return vectors_; }
  std::span<const float> row(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }

  std::size_t distinct_passages() const { return distinct_passages_; }
  /// Rows per distinct passage id.
  double avg_sentences_per_passage() const;
  /// ceil(100 * avg_sentences_per_passage)
  std::size_t default_depth() const;

  /// Position of each row in (passage_id, ordinal) order; used to break ties.
  const std::vector<std::size_t>& key_rank() const { return key_rank_; }

  bool operator==(const SentenceIndex& other) const {
    return dim_ == other.dim_ && keys_ == other.keys_ && vectors_ == other.vectors_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<SentenceKey> keys_;
  std::vector<float> vectors_;
  std::vector<std::size_t> key_rank_;
  std::size_t distinct_passages_ = 0;
};

/// One row per sentence, passages in input order then ordinals. A passage id
/// seen earlier in the list is skipped.
SentenceIndex build_index(std::span<const Passage> passages, const EncoderParams& params);

struct SearchHit {
  SentenceKey key;
  double score = 0.0;
  std::size_t row = 0;
};

/// Exact inner-product scan. Scores descending, ties by (passage_id, ordinal).
std::vector<SearchHit> search(const SentenceIndex& index, std::span<const double> query,
                              std::size_t top_m);

/// "DIDX" | version u32 | dim u32 | N u64 | rows, little-endian. Each row is
/// id length u16, id bytes, ordinal u32, dim f32.
void save_index(const std::filesystem::path& path, const SentenceIndex& index);
SentenceIndex load_index(const std::filesystem::path& path);

/// Same layout under the "DVEC" magic, for vectors computed elsewhere.
void export_vectors(const std::filesystem::path& path, const SentenceIndex& index);
SentenceIndex import_vectors(const std::filesystem::path& path);

}  // namespace dcsr
