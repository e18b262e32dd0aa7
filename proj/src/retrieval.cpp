#include "dcsr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "dcsr/errors.hpp"
#include "dcsr/kernels.hpp"
#include "dcsr/rng.hpp"
#include "dcsr/text.hpp"

namespace dcsr {

namespace {

using nlohmann::json;

std::vector<std::string> normalized(const std::vector<std::string>& answers) {
  std::vector<std::string> out;
  for (const auto& a : answers) {
    auto n = normalize_text(a);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

bool contains_any(const std::string& text, const std::vector<std::string>& needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](const std::string& n) { return text.find(n) != std::string::npos; });
}

// Normalized text for every passage in the store, computed once.
std::unordered_map<std::string, std::string> normalized_store(const PassageStore& store) {
  const auto& passages = store.passages();
  std::vector<std::string> texts(passages.size());
  const auto n = static_cast<std::int64_t>(passages.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) {
    texts[static_cast<std::size_t>(i)] = normalize_text(passages[static_cast<std::size_t>(i)].source_text);
  }
  std::unordered_map<std::string, std::string> out;
  out.reserve(passages.size());
  for (std::size_t i = 0; i < passages.size(); ++i) out.emplace(passages[i].id, std::move(texts[i]));
  return out;
}

}  // namespace

std::vector<double> normalize_scores(std::span<const double> scores) {
  if (scores.empty()) fail(ErrorKind::RangeError, "cannot normalize an empty score list");
  for (double s : scores) {
    if (!std::isfinite(s)) fail(ErrorKind::NumericalError, "non-finite retrieval score");
  }
  const double max = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - max);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

double has_ans(std::span<const double> sentence_probs) {
  // Running form of 1 - prod(1 - p): h <- h + p (1 - h). It returns a
  // lone p unchanged, which the product form does not in floating point;
  // the max only absorbs rounding, the exact value is never below p.
  double h = 0.0;
  for (double p : sentence_probs) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::RangeError, "sentence probability outside [0, 1]");
    h = std::max(h + p * (1.0 - h), p);
  }
  return h;
}

RankedPassageList rank_passages(const SentenceIndex& index, std::span<const double> query, std::size_t top_m,
                                std::size_t passage_limit, std::string question_id) {
  if (index.empty()) fail(ErrorKind::RangeError, "cannot rank against an empty index");
  const auto hits = search(index, query, top_m);
  std::vector<double> scores;
  scores.reserve(hits.size());
  for (const auto& h : hits) scores.push_back(h.score);
  const auto probs = normalize_scores(scores);

  RankedPassageList list;
  list.question_id = std::move(question_id);
  list.retrieved_sentences = hits.size();
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(hits[i].key.passage_id, list.entries.size());
    if (inserted) list.entries.push_back(RankedPassage{hits[i].key.passage_id, 0.0, {}});
    list.entries[it->second].sentences.push_back({hits[i].key.ordinal, hits[i].score, probs[i]});
  }
  std::vector<double> buffer;
  for (auto& entry : list.entries) {
    buffer.clear();
    for (const auto& s : entry.sentences) buffer.push_back(s.probability);
    entry.has_ans_probability = has_ans(buffer);
  }
  std::sort(list.entries.begin(), list.entries.end(), [](const RankedPassage& a, const RankedPassage& b) {
    if (a.has_ans_probability != b.has_ans_probability) return a.has_ans_probability > b.has_ans_probability;
    return a.passage_id < b.passage_id;
  });
  if (passage_limit > 0) {
    list.shortfall = list.entries.size() < passage_limit;
    if (list.entries.size() > passage_limit) list.entries.resize(passage_limit);
  }
  return list;
}

PassageVectorIndex::PassageVectorIndex(const SentenceIndex& sentences) : dim_(sentences.dim()) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<double>> sums;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& id = sentences.keys()[i].passage_id;
    auto [it, inserted] = slot.try_emplace(id, ids_.size());
    if (inserted) {
      ids_.push_back(id);
      sums.emplace_back(dim_, 0.0);
      counts.push_back(0);
    }
    auto& sum = sums[it->second];
    const auto row = sentences.row(i);
    for (std::size_t d = 0; d < dim_; ++d) sum[d] += row[d];
    ++counts[it->second];
  }
  vectors_.resize(ids_.size() * dim_);
  for (std::size_t p = 0; p < ids_.size(); ++p) {
    for (std::size_t d = 0; d < dim_; ++d) {
      vectors_[p * dim_ + d] = static_cast<float>(sums[p][d] / static_cast<double>(counts[p]));
    }
  }
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  id_rank_.resize(ids_.size());
  for (std::size_t r = 0; r < order.size(); ++r) id_rank_[order[r]] = r;
}

std::vector<std::pair<std::string, double>> PassageVectorIndex::rank(std::span<const double> query,
                                                                     std::size_t top) const {
  std::vector<double> scores(ids_.size());
  kernels::inner_products(vectors_, dim_, query, scores);
  const auto best = kernels::select_top(scores, id_rank_, top);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(best.size());
  for (auto p : best) out.emplace_back(ids_[p], scores[p]);
  return out;
}

std::string eval_report_json(const EvalReport& report) {
  json k = json::object();
  for (const auto& [cut, acc] : report.top_k_accuracy) k[std::to_string(cut)] = acc;
  return json{{"k", k},
              {"questions", report.questions},
              {"corpus_sentences", report.corpus_sentences},
              {"shortfall_questions", report.shortfall_questions}}
      .dump();
}

EvalReport parse_eval_report(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, std::string("eval report: ") + e.what());
  }
  if (!j.is_object() || !j.contains("k") || !j.contains("questions") || !j.contains("corpus_sentences")) {
    fail(ErrorKind::SchemaError, "eval report lacks k, questions or corpus_sentences");
  }
  EvalReport report;
  for (const auto& [cut, acc] : j.at("k").items()) report.top_k_accuracy[std::stoul(cut)] = acc.get<double>();
  report.questions = j.at("questions").get<std::size_t>();
  report.corpus_sentences = j.at("corpus_sentences").get<std::size_t>();
  if (j.contains("shortfall_questions")) report.shortfall_questions = j.at("shortfall_questions").get<std::size_t>();
  return report;
}

EvalReport evaluate(const std::vector<QAExample>& dataset, const SentenceIndex& index, const EncoderParams& params,
                    const PassageStore& store, const EvalOptions& options) {
  if (options.ks.empty()) fail(ErrorKind::RangeError, "evaluation needs at least one k");
  if (std::find(options.ks.begin(), options.ks.end(), std::size_t{0}) != options.ks.end()) {
    fail(ErrorKind::RangeError, "k must be at least 1");
  }
  const std::size_t max_k = *std::max_element(options.ks.begin(), options.ks.end());
  const std::size_t depth = options.depth > 0 ? options.depth : index.default_depth();
  const auto texts = normalized_store(store);
  std::optional<PassageVectorIndex> passage_index;
  if (options.granularity == Granularity::Passage) passage_index.emplace(index);

  const auto n = static_cast<std::int64_t>(dataset.size());
  // Position of the first answer-bearing passage in each ranking, or max_k.
  std::vector<std::size_t> first_hit(dataset.size(), max_k);
  std::vector<char> shortfall(dataset.size(), 0);
  std::vector<std::string> errors(dataset.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t qi = 0; qi < n; ++qi) {
    const auto i = static_cast<std::size_t>(qi);
    try {
      const auto& example = dataset[i];
      const auto needles = normalized(example.answers);
      const auto query = encode_question(example.question, params);
      std::vector<std::string> ranked;
      if (passage_index) {
        for (auto& [id, score] : passage_index->rank(query, max_k)) ranked.push_back(std::move(id));
      } else {
        auto list = rank_passages(index, query, depth, max_k);
        shortfall[i] = list.shortfall ? 1 : 0;
        for (auto& e : list.entries) ranked.push_back(std::move(e.passage_id));
      }
      if (ranked.size() < max_k) shortfall[i] = 1;
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        auto it = texts.find(ranked[r]);
        if (it != texts.end() && contains_any(it->second, needles)) {
          first_hit[i] = r;
          break;
        }
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) fail(ErrorKind::RangeError, "evaluation failed: " + e);
  }

  EvalReport report;
  report.questions = dataset.size();
  report.corpus_sentences = index.size();
  report.shortfall_questions = static_cast<std::size_t>(std::count(shortfall.begin(), shortfall.end(), 1));
  for (auto k : options.ks) {
    const auto hits = std::count_if(first_hit.begin(), first_hit.end(), [k](std::size_t f) { return f < k; });
    report.top_k_accuracy[k] =
        dataset.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(dataset.size());
  }
  return report;
}

MiningResult mine_hard_negatives(const std::vector<QAExample>& dataset, const SentenceIndex& index,
                                 const EncoderParams& params, const PassageStore& store,
                                 const MiningOptions& options) {
  MiningResult result;
  result.examples = dataset;
  if (options.per_question == 0) return result;
  if (params.dim != index.dim()) fail(ErrorKind::DimensionError, "checkpoint dim does not match index dim");

  const std::size_t depth = options.depth > 0 ? options.depth : index.default_depth();
  const auto texts = normalized_store(store);
  const auto n = static_cast<std::int64_t>(dataset.size());
  std::vector<std::vector<Passage>> mined(dataset.size());
  std::vector<std::string> errors(dataset.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t qi = 0; qi < n; ++qi) {
    const auto i = static_cast<std::size_t>(qi);
    try {
      const auto& example = dataset[i];
      const auto needles = normalized(example.answers);
      std::unordered_set<std::string> positive_ids;
      for (const auto& p : example.positives) positive_ids.insert(p.id);
      std::unordered_set<std::string> taken;
      const auto hits = search(index, encode_question(example.question, params), depth);
      for (const auto& hit : hits) {
        if (mined[i].size() == options.per_question) break;
        const auto& id = hit.key.passage_id;
        if (positive_ids.contains(id)) continue;
        const Passage* passage = store.find(id);
        auto text = texts.find(id);
        if (passage == nullptr || text == texts.end() || contains_any(text->second, needles)) continue;
        if (hit.key.ordinal >= passage->sentences.size()) continue;
        const auto& sentence = passage->sentences[hit.key.ordinal].text;
        if (!taken.insert(sentence).second) continue;
        mined[i].push_back(label_answers(make_passage(passage->title, sentence), example.answers));
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) fail(ErrorKind::RangeError, "mining failed: " + e);
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (mined[i].empty()) {
      ++result.questions_without_mined;
      continue;
    }
    result.mined += mined[i].size();
    auto& negatives = result.examples[i].bm25_negatives;
    if (options.mode == MiningMode::Augment) {
      mined[i].insert(mined[i].end(), negatives.begin(), negatives.end());
    }
    negatives = std::move(mined[i]);
  }
  return result;
}

std::vector<Passage> subsample_corpus(std::span<const Passage> passages, FirstN first) {
  if (first.n == 0 || first.n > passages.size()) {
    fail(ErrorKind::RangeError, "first_n must lie in [1, " + std::to_string(passages.size()) + "]");
  }
  return {passages.begin(), passages.begin() + static_cast<std::ptrdiff_t>(first.n)};
}

std::vector<Passage> subsample_corpus(std::span<const Passage> passages, Fraction fraction) {
  if (!(fraction.fraction > 0.0 && fraction.fraction <= 1.0)) fail(ErrorKind::RangeError, "fraction must lie in (0, 1]");
  if (passages.empty()) fail(ErrorKind::RangeError, "cannot subsample an empty corpus");
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction.fraction * static_cast<double>(passages.size()))));
  std::vector<std::size_t> order(passages.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(fraction.seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(take);
  std::sort(order.begin(), order.end());
  std::vector<Passage> out;
  out.reserve(take);
  for (auto i : order) out.push_back(passages[i]);
  return out;
}

}  // namespace dcsr
