#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dcsr {

struct Sentence {
  std::size_t ordinal = 0;
  std::string text;
  bool contains_answer = false;

  bool operator==(const Sentence&) const = default;
};

struct Passage {
  std::string id;
  std::string title;
  std::vector<Sentence> sentences;
  std::string source_text;

  bool operator==(const Passage&) const = default;
};

struct SentenceRef {
  std::string passage_id;
  std::size_t ordinal = 0;

  bool operator==(const SentenceRef&) const = default;
  auto operator<=>(const SentenceRef&) const = default;
};

struct QAExample {
  std::string question;
  std::vector<std::string> answers;
  std::vector<Passage> positives;
  std::vector<Passage> bm25_negatives;
  /// Chosen by the sampler at batch time; unset after loading.
  std::optional<SentenceRef> gold_sentence;

  bool operator==(const QAExample&) const = default;
};

/// Split text into sentences on '.', '!' or '?' followed by whitespace and an
/// uppercase letter or digit. Known abbreviations and single-letter initials
/// do not end a sentence. Sentence text has whitespace collapsed.
/// Throws EmptyText when text is empty or whitespace only.
std::vector<Sentence> segment(std::string_view text);

/// Segment and wrap as a passage; id is derived from the normalized text.
Passage make_passage(std::string_view title, std::string_view text);

/// Flags each sentence whose normalized text contains a normalized answer.
Passage label_answers(Passage passage, const std::vector<std::string>& answers);

bool has_answer_sentence(const Passage& passage);

/// True when the normalized passage text contains any normalized answer.
bool passage_contains_answer(const Passage& passage,
                             const std::vector<std::string>& answers);

struct LoadResult {
  std::vector<QAExample> examples;
  std::size_t dropped = 0;
};

/// One JSON object per line:
///   {"question", "answers", "positive_ctxs": [{title, text}], "negative_ctxs": [...]}
/// Positives without an answer-bearing sentence are discarded; an example
/// left with no positive is dropped and counted. Blank lines are skipped.
LoadResult load_dataset(const std::filesystem::path& path);
LoadResult parse_dataset(std::string_view content);

std::string serialize_example(const QAExample& example);
void write_dataset(const std::filesystem::path& path,
                   const std::vector<QAExample>& examples);

/// Passage collection file: one {"id"?, "title", "text"} object per line.
/// A missing id is derived from the text.
std::vector<Passage> load_passages(const std::filesystem::path& path);
void write_passages(const std::filesystem::path& path,
                    const std::vector<Passage>& passages);

/// Distinct passages referenced by a dataset (positives, then negatives),
/// in first-seen order.
std::vector<Passage> collect_passages(const std::vector<QAExample>& examples);

class PassageStore {
 public:
  PassageStore() = default;
  explicit PassageStore(std::vector<Passage> passages);

  void add(Passage passage);
  const Passage* find(std::string_view id) const;
  std::size_t size() const { return passages_.size(); }
  const std::vector<Passage>& passages() const { return passages_; }

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct ConflictStats {
  /// Keys 1, 2, 3 and 4 (meaning four or more).
  std::map<int, std::size_t> histogram;
  double average = 0.0;
  std::size_t distinct_passages = 0;
  std::size_t references = 0;
};

/// Questions per distinct positive passage.
ConflictStats conflict_stats(const std::vector<QAExample>& dataset);
std::string conflict_stats_json(const ConflictStats& stats);

struct OverlapStats {
  double title_overlap = 0.0;
  double passage_overlap = 0.0;
  std::size_t questions = 0;
};

/// Fraction of dev questions having a positive whose title (resp. exact
/// normalized text) also occurs among the train positives.
OverlapStats overlap_stats(const std::vector<QAExample>& train,
                           const std::vector<QAExample>& dev);

}  // namespace dcsr
