#include "dcsr/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_set>

#include "binary_io.hpp"
#include "dcsr/errors.hpp"
#include "dcsr/kernels.hpp"

namespace dcsr {

namespace {

constexpr std::string_view kIndexMagic = "DIDX";
constexpr std::string_view kVectorMagic = "DVEC";

std::string encode_rows(std::string_view magic, const SentenceIndex& index) {
  detail::ByteWriter w;
  w.reserve(20 + index.size() * (index.dim() * 4 + 24));
  w.bytes(magic);
  w.put<std::uint32_t>(kIndexVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(index.dim()));
  w.put<std::uint64_t>(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& key = index.keys()[i];
    if (key.passage_id.size() > UINT16_MAX) fail(ErrorKind::IndexFormatError, "passage id too long: " + key.passage_id);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(key.passage_id.size()));
    w.bytes(key.passage_id);
    w.put<std::uint32_t>(key.ordinal);
    for (float v : index.row(i)) w.put<float>(v);
  }
  return w.buffer();
}

SentenceIndex decode_rows(std::string_view magic, std::string_view data, const std::string& origin) {
  detail::ByteReader r(data, ErrorKind::IndexFormatError);
  const auto found = r.bytes(4);
  if (found != magic) {
    fail(ErrorKind::IndexFormatError, origin + ": expected magic " + std::string(magic));
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kIndexVersion) {
    fail(ErrorKind::IndexFormatError, origin + ": unsupported version " + std::to_string(version));
  }
  const std::size_t dim = r.get<std::uint32_t>();
  const std::uint64_t rows = r.get<std::uint64_t>();
  if (dim == 0) fail(ErrorKind::IndexFormatError, origin + ": zero dimension");
  // Every row needs at least 2 + 4 + 4 * dim bytes.
  if (rows > r.remaining() / (6 + 4 * dim)) fail(ErrorKind::IndexFormatError, origin + ": row count exceeds file size");

  std::vector<SentenceKey> keys;
  keys.reserve(rows);
  std::vector<float> vectors;
  vectors.reserve(rows * dim);
  for (std::uint64_t i = 0; i < rows; ++i) {
    const auto length = r.get<std::uint16_t>();
    SentenceKey key;
    key.passage_id = std::string(r.bytes(length));
    key.ordinal = r.get<std::uint32_t>();
    keys.push_back(std::move(key));
    for (std::size_t d = 0; d < dim; ++d) {
      const float v = r.get<float>();
      if (!std::isfinite(v)) fail(ErrorKind::IndexFormatError, origin + ": non-finite vector entry");
      vectors.push_back(v);
    }
  }
  if (r.remaining() != 0) fail(ErrorKind::IndexFormatError, origin + ": trailing bytes after last row");
  try {
    return SentenceIndex(dim, std::move(keys), std::move(vectors));
  } catch (const Error& e) {
    fail(ErrorKind::IndexFormatError, origin + ": " + e.what());
  }
}

}  // namespace

SentenceIndex::SentenceIndex(std::size_t dim, std::vector<SentenceKey> keys, std::vector<float> vectors)
    : dim_(dim), keys_(std::move(keys)), vectors_(std::move(vectors)) {
  if (dim_ == 0 || vectors_.size() != keys_.size() * dim_) {
    fail(ErrorKind::DimensionError, "index vectors do not match keys x dim");
  }
  key_rank_.resize(keys_.size());
  std::vector<std::size_t> order(keys_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys_[a] < keys_[b]; });
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    key_rank_[order[rank]] = rank;
    if (rank > 0 && keys_[order[rank]] == keys_[order[rank - 1]]) {
      fail(ErrorKind::RangeError, "duplicate sentence key " + keys_[order[rank]].passage_id + "#" +
                                      std::to_string(keys_[order[rank]].ordinal));
    }
    if (rank == 0 || keys_[order[rank]].passage_id != keys_[order[rank - 1]].passage_id) ++distinct_passages_;
  }
}

double SentenceIndex::avg_sentences_per_passage() const {
  return distinct_passages_ == 0 ? 0.0 : static_cast<double>(keys_.size()) / static_cast<double>(distinct_passages_);
}

std::size_t SentenceIndex::default_depth() const {
  return static_cast<std::size_t>(std::ceil(100.0 * avg_sentences_per_passage() - 1e-9));
}

SentenceIndex build_index(std::span<const Passage> passages, const EncoderParams& params) {
  if (passages.empty()) fail(ErrorKind::RangeError, "cannot build an index from zero passages");
  std::vector<const Passage*> unique;
  std::unordered_set<std::string> seen;
  for (const auto& p : passages) {
    if (seen.insert(p.id).second) unique.push_back(&p);
  }
  std::vector<std::size_t> offset(unique.size() + 1, 0);
  for (std::size_t i = 0; i < unique.size(); ++i) offset[i + 1] = offset[i] + unique[i]->sentences.size();

  const std::size_t dim = params.dim;
  std::vector<SentenceKey> keys(offset.back());
  std::vector<float> vectors(offset.back() * dim);
  std::vector<std::string> errors(unique.size());

  const auto count = static_cast<std::int64_t>(unique.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto pi = static_cast<std::size_t>(i);
    const Passage& passage = *unique[pi];
    try {
      const auto encoded = encode_passage(passage, params);
      for (std::size_t s = 0; s < encoded.size(); ++s) {
        const std::size_t row = offset[pi] + s;
        keys[row] = {passage.id, static_cast<std::uint32_t>(passage.sentences[s].ordinal)};
        for (std::size_t d = 0; d < dim; ++d) vectors[row * dim + d] = static_cast<float>(encoded[s][d]);
      }
    } catch (const std::exception& e) {
      errors[pi] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) fail(ErrorKind::EmptyText, "passage " + unique[i]->id + ": " + errors[i]);
  }
  return SentenceIndex(dim, std::move(keys), std::move(vectors));
}

std::vector<SearchHit> search(const SentenceIndex& index, std::span<const double> query, std::size_t top_m) {
  if (top_m < 1) fail(ErrorKind::RangeError, "top_m must be at least 1");
  if (query.size() != index.dim()) {
    fail(ErrorKind::DimensionError, "query dim " + std::to_string(query.size()) + " does not match index dim " +
                                        std::to_string(index.dim()));
  }
  std::vector<double> scores(index.size());
  kernels::inner_products(index.vectors(), index.dim(), query, scores);
  const auto top = kernels::select_top(scores, index.key_rank(), top_m);
  std::vector<SearchHit> hits;
  hits.reserve(top.size());
  for (auto row : top) hits.push_back({index.keys()[row], scores[row], row});
  return hits;
}

void save_index(const std::filesystem::path& path, const SentenceIndex& index) {
  detail::write_binary_file(path.string(), encode_rows(kIndexMagic, index));
}

SentenceIndex load_index(const std::filesystem::path& path) {
  return decode_rows(kIndexMagic, detail::read_binary_file(path.string(), ErrorKind::IoError), path.string());
}

void export_vectors(const std::filesystem::path& path, const SentenceIndex& index) {
  detail::write_binary_file(path.string(), encode_rows(kVectorMagic, index));
}

SentenceIndex import_vectors(const std::filesystem::path& path) {
  return decode_rows(kVectorMagic, detail::read_binary_file(path.string(), ErrorKind::IoError), path.string());
}

}  // namespace dcsr
