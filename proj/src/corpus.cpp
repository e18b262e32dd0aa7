#include "dcsr/corpus.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "dcsr/errors.hpp"
#include "dcsr/text.hpp"

namespace dcsr {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 13> kAbbreviations = {
    "dr.", "mr.", "mrs.", "ms.", "st.", "jr.", "sr.", "prof.",
    "u.s.", "e.g.", "i.e.", "etc.", "vs.",
};

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// Uppercase letter or digit at byte offset pos.
bool starts_sentence(std::string_view text, std::size_t pos) {
  const auto c = static_cast<unsigned char>(text[pos]);
  if (c < 0x80) return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
  int32_t offset = static_cast<int32_t>(pos);
  UChar32 cp = 0;
  U8_NEXT(text.data(), offset, static_cast<int32_t>(text.size()), cp);
  return cp >= 0 && (u_isupper(cp) || u_istitle(cp) || u_isdigit(cp));
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// The word ending at a '.' located at `dot` is an abbreviation or an initial.
bool is_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0 && !is_space(static_cast<unsigned char>(text[begin - 1]))) --begin;
  while (begin < dot && (text[begin] == '"' || text[begin] == '(' || text[begin] == '\'' ||
                         text[begin] == '[')) {
    ++begin;
  }
  const std::string_view word = text.substr(begin, dot - begin + 1);
  if (word.size() == 2 && word[0] >= 'A' && word[0] <= 'Z') return true;
  const std::string lowered = lower_ascii(word);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lowered) !=
         kAbbreviations.end();
}

Sentence make_sentence(std::string_view raw, std::size_t ordinal) {
  return Sentence{ordinal, collapse_whitespace(raw), false};
}

std::vector<std::string> normalized_answers(const std::vector<std::string>& answers) {
  std::vector<std::string> out;
  out.reserve(answers.size());
  for (const auto& a : answers) {
    auto n = normalize_text(a);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

bool contains_any(const std::string& haystack, const std::vector<std::string>& needles) {
  return std::any_of(needles.begin(), needles.end(), [&](const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
  });
}

std::string line_context(std::size_t line) { return "line " + std::to_string(line); }

const json& require(const json& object, const char* field, std::size_t line) {
  auto it = object.find(field);
  if (it == object.end()) {
    fail(ErrorKind::SchemaError, line_context(line) + ": missing field '" + field + "'");
  }
  return *it;
}

std::string require_string(const json& object, const char* field, std::size_t line) {
  const auto& value = require(object, field, line);
  if (!value.is_string()) {
    fail(ErrorKind::SchemaError, line_context(line) + ": field '" + field + "' must be a string");
  }
  return value.get<std::string>();
}

std::vector<Passage> parse_ctxs(const json& object, const char* field, std::size_t line) {
  const auto& ctxs = require(object, field, line);
  if (!ctxs.is_array()) {
    fail(ErrorKind::SchemaError, line_context(line) + ": field '" + field + "' must be an array");
  }
  std::vector<Passage> passages;
  passages.reserve(ctxs.size());
  for (const auto& ctx : ctxs) {
    if (!ctx.is_object()) {
      fail(ErrorKind::SchemaError, line_context(line) + ": entries of '" + field + "' must be objects");
    }
    const auto title = require_string(ctx, "title", line);
    const auto text = require_string(ctx, "text", line);
    if (normalize_text(text).empty()) {
      fail(ErrorKind::SchemaError, line_context(line) + ": empty passage text in '" + field + "'");
    }
    passages.push_back(make_passage(title, text));
  }
  return passages;
}

// std::nullopt when every positive lacks the answer.
std::optional<QAExample> parse_example(const json& object, std::size_t line) {
  if (!object.is_object()) {
    fail(ErrorKind::SchemaError, line_context(line) + ": expected a JSON object");
  }
  QAExample example;
  example.question = require_string(object, "question", line);
  if (normalize_text(example.question).empty()) {
    fail(ErrorKind::SchemaError, line_context(line) + ": empty question");
  }
  const auto& answers = require(object, "answers", line);
  if (!answers.is_array() || answers.empty()) {
    fail(ErrorKind::SchemaError, line_context(line) + ": 'answers' must be a non-empty array");
  }
  std::set<std::string> seen;
  for (const auto& a : answers) {
    if (!a.is_string()) {
      fail(ErrorKind::SchemaError, line_context(line) + ": answers must be strings");
    }
    auto s = a.get<std::string>();
    if (seen.insert(s).second) example.answers.push_back(std::move(s));
  }

  auto positives = parse_ctxs(object, "positive_ctxs", line);
  auto negatives = parse_ctxs(object, "negative_ctxs", line);
  for (auto& p : positives) {
    p = label_answers(std::move(p), example.answers);
    if (has_answer_sentence(p)) example.positives.push_back(std::move(p));
  }
  for (auto& n : negatives) example.bm25_negatives.push_back(label_answers(std::move(n), example.answers));
  if (example.positives.empty()) return std::nullopt;
  return example;
}

json ctx_json(const Passage& p) { return json{{"title", p.title}, {"text", p.source_text}}; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

std::vector<Sentence> segment(std::string_view text) {
  std::size_t first = 0;
  while (first < text.size() && is_space(static_cast<unsigned char>(text[first]))) ++first;
  if (first == text.size()) fail(ErrorKind::EmptyText, "cannot segment empty text");

  std::vector<Sentence> sentences;
  std::size_t start = first;
  for (std::size_t i = first; i < text.size(); ++i) {
    if (!is_terminator(text[i])) continue;
    std::size_t end = i + 1;
    while (end < text.size() && (is_terminator(text[end]) || is_closer(text[end]))) ++end;
    if (end >= text.size() || !is_space(static_cast<unsigned char>(text[end]))) continue;
    std::size_t next = end;
    while (next < text.size() && is_space(static_cast<unsigned char>(text[next]))) ++next;
    if (next >= text.size() || !starts_sentence(text, next)) continue;
    if (text[i] == '.' && end == i + 1 && is_abbreviation(text, i)) continue;

    sentences.push_back(make_sentence(text.substr(start, end - start), sentences.size()));
    start = next;
    i = next - 1;
  }
  auto tail = make_sentence(text.substr(start), sentences.size());
  if (!tail.text.empty()) sentences.push_back(std::move(tail));
  return sentences;
}

Passage make_passage(std::string_view title, std::string_view text) {
  Passage p;
  p.id = passage_id_for(text);
  p.title = std::string(title);
  p.sentences = segment(text);
  p.source_text = std::string(text);
  return p;
}

Passage label_answers(Passage passage, const std::vector<std::string>& answers) {
  const auto needles = normalized_answers(answers);
  for (auto& s : passage.sentences) {
    s.contains_answer = contains_any(normalize_text(s.text), needles);
  }
  return passage;
}

bool has_answer_sentence(const Passage& passage) {
  return std::any_of(passage.sentences.begin(), passage.sentences.end(),
                     [](const Sentence& s) { return s.contains_answer; });
}

bool passage_contains_answer(const Passage& passage, const std::vector<std::string>& answers) {
  return contains_any(normalize_text(passage.source_text), normalized_answers(answers));
}

LoadResult parse_dataset(std::string_view content) {
  LoadResult result;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t eol = std::min(content.find('\n', pos), content.size());
    const std::string_view line = content.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](char c) { return is_space(static_cast<unsigned char>(c)); })) {
      if (eol == content.size()) break;
      continue;
    }
    json object;
    try {
      object = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::ParseError, line_context(line_no) + ": " + e.what());
    }
    if (auto example = parse_example(object, line_no)) {
      result.examples.push_back(std::move(*example));
    } else {
      ++result.dropped;
    }
    if (eol == content.size()) break;
  }
  return result;
}

LoadResult load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

std::string serialize_example(const QAExample& example) {
  json positives = json::array();
  for (const auto& p : example.positives) positives.push_back(ctx_json(p));
  json negatives = json::array();
  for (const auto& n : example.bm25_negatives) negatives.push_back(ctx_json(n));
  json object{{"question", example.question},
              {"answers", example.answers},
              {"positive_ctxs", std::move(positives)},
              {"negative_ctxs", std::move(negatives)}};
  return object.dump();
}

void write_dataset(const std::filesystem::path& path, const std::vector<QAExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& e : examples) out << serialize_example(e) << '\n';
}

std::vector<Passage> load_passages(const std::filesystem::path& path) {
  const auto content = read_file(path);
  std::vector<Passage> passages;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (collapse_whitespace(line).empty()) continue;
    json object;
    try {
      object = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::ParseError, line_context(line_no) + ": " + e.what());
    }
    if (!object.is_object()) fail(ErrorKind::SchemaError, line_context(line_no) + ": expected a JSON object");
    const auto title = object.contains("title") ? require_string(object, "title", line_no) : std::string{};
    const auto text = require_string(object, "text", line_no);
    if (normalize_text(text).empty()) fail(ErrorKind::SchemaError, line_context(line_no) + ": empty passage text");
    auto passage = make_passage(title, text);
    if (object.contains("id")) passage.id = require_string(object, "id", line_no);
    passages.push_back(std::move(passage));
  }
  return passages;
}

void write_passages(const std::filesystem::path& path, const std::vector<Passage>& passages) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& p : passages) {
    out << json{{"id", p.id}, {"title", p.title}, {"text", p.source_text}}.dump() << '\n';
  }
}

std::vector<Passage> collect_passages(const std::vector<QAExample>& examples) {
  std::vector<Passage> out;
  std::unordered_set<std::string> seen;
  auto add = [&](const Passage& p) {
    if (seen.insert(p.id).second) {
      Passage copy = p;
      for (auto& s : copy.sentences) s.contains_answer = false;
      out.push_back(std::move(copy));
    }
  };
  for (const auto& e : examples) {
    for (const auto& p : e.positives) add(p);
  }
  for (const auto& e : examples) {
    for (const auto& n : e.bm25_negatives) add(n);
  }
  return out;
}

PassageStore::PassageStore(std::vector<Passage> passages) {
  for (auto& p : passages) add(std::move(p));
}

void PassageStore::add(Passage passage) {
  if (by_id_.contains(passage.id)) return;
  by_id_.emplace(passage.id, passages_.size());
  passages_.push_back(std::move(passage));
}

const Passage* PassageStore::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &passages_[it->second];
}

ConflictStats conflict_stats(const std::vector<QAExample>& dataset) {
  if (dataset.empty()) fail(ErrorKind::RangeError, "conflict_stats needs a non-empty dataset");
  std::unordered_map<std::string, std::size_t> questions_per_passage;
  std::size_t references = 0;
  for (const auto& e : dataset) {
    std::unordered_set<std::string> ids;
    for (const auto& p : e.positives) ids.insert(p.id);
    for (const auto& id : ids) ++questions_per_passage[id];
    references += ids.size();
  }
  ConflictStats stats;
  stats.histogram = {{1, 0}, {2, 0}, {3, 0}, {4, 0}};
  for (const auto& [id, count] : questions_per_passage) {
    ++stats.histogram[static_cast<int>(std::min<std::size_t>(count, 4))];
  }
  stats.distinct_passages = questions_per_passage.size();
  stats.references = references;
  stats.average = stats.distinct_passages == 0
                      ? 0.0
                      : static_cast<double>(references) / static_cast<double>(stats.distinct_passages);
  return stats;
}

std::string conflict_stats_json(const ConflictStats& stats) {
  json histogram{{"1", stats.histogram.at(1)},
                 {"2", stats.histogram.at(2)},
                 {"3", stats.histogram.at(3)},
                 {"4plus", stats.histogram.at(4)}};
  return json{{"histogram", histogram}, {"average", stats.average}}.dump();
}

OverlapStats overlap_stats(const std::vector<QAExample>& train, const std::vector<QAExample>& dev) {
  std::unordered_set<std::string> titles;
  std::unordered_set<std::string> passages;
  for (const auto& e : train) {
    for (const auto& p : e.positives) {
      titles.insert(normalize_text(p.title));
      passages.insert(p.id);
    }
  }
  OverlapStats stats;
  std::size_t title_hits = 0;
  std::size_t passage_hits = 0;
  for (const auto& e : dev) {
    if (e.positives.empty()) continue;
    ++stats.questions;
    const bool title_hit = std::any_of(e.positives.begin(), e.positives.end(), [&](const Passage& p) {
      return titles.contains(normalize_text(p.title));
    });
    const bool passage_hit = std::any_of(e.positives.begin(), e.positives.end(),
                                         [&](const Passage& p) { return passages.contains(p.id); });
    title_hits += title_hit ? 1 : 0;
    passage_hits += passage_hit ? 1 : 0;
  }
  if (stats.questions > 0) {
    stats.title_overlap = static_cast<double>(title_hits) / static_cast<double>(stats.questions);
    stats.passage_overlap = static_cast<double>(passage_hits) / static_cast<double>(stats.questions);
  }
  return stats;
}

}  // namespace dcsr
