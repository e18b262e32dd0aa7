#include <doctest.h>

#include <json.hpp>

#include "dcsr/errors.hpp"
#include "dcsr/index.hpp"
#include "dcsr/retrieval.hpp"
#include "dcsr/synth.hpp"
#include "support/oracles.hpp"

using namespace dcsr;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::IoError;
}

SentenceIndex hand_index(const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
  std::vector<SentenceKey> keys;
  std::vector<float> v;
  std::map<std::string, std::uint32_t> next;
  for (const auto& [id, vec] : rows) {
    keys.push_back({id, next[id]++});
    v.insert(v.end(), vec.begin(), vec.end());
  }
  return SentenceIndex(rows.front().second.size(), keys, v);
}

bool oracle_contains(const Passage& p, const std::vector<std::string>& answers) {
  std::string text;
  for (const auto& s : p.sentences) text += s.text + " ";
  text = oracle::normalize_ascii(text);
  for (const auto& a : answers) {
    if (text.find(oracle::normalize_ascii(a)) != std::string::npos) return true;
  }
  return false;
}

// Brute-force top-k accuracy from the oracle ranking.
std::map<std::size_t, double> oracle_eval(const std::vector<QAExample>& data, const SentenceIndex& idx,
                                          const EncoderParams& params, const PassageStore& store,
                                          const std::vector<std::size_t>& ks) {
  std::map<std::size_t, double> hits;
  for (auto k : ks) hits[k] = 0.0;
  for (const auto& e : data) {
    const auto ranked = oracle::rank(idx, encode_question(e.question, params), idx.default_depth());
    std::size_t first = ranked.size() + 1;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      const Passage* p = store.find(ranked[r].passage_id);
      if (p && oracle_contains(*p, e.answers)) {
        first = r + 1;
        break;
      }
    }
    for (auto k : ks) hits[k] += first <= k ? 1.0 : 0.0;
  }
  for (auto& [k, v] : hits) v /= static_cast<double>(data.size());
  return hits;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("normalize_scores") {
  const auto half = normalize_scores(std::vector<double>{0, 0});
  CHECK(half == std::vector<double>{0.5, 0.5});
  const auto q = normalize_scores(std::vector<double>{std::log(1.0), std::log(3.0)});
  CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-15));
  std::mt19937_64 gen(1);
  const auto v = testgen::random_vector(gen, 500, 5.0);
  const auto p = normalize_scores(v);
  const auto o = oracle::softmax(v);
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(std::abs(p[i] - static_cast<double>(o[i])) < 1e-12);
    sum += p[i];
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK(kind_of([] { normalize_scores(std::vector<double>{1.0, std::nan("")}); }) == ErrorKind::NumericalError);
  CHECK(kind_of([] { normalize_scores(std::vector<double>{}); }) == ErrorKind::RangeError);
}

TEST_CASE("has_ans") {
  CHECK(has_ans(std::vector<double>{0.5, 0.5}) == 0.75);
  for (double p : {0.0, 0.1, 0.37, 1.0}) CHECK(has_ans(std::vector<double>{p}) == p);
  CHECK(std::abs(has_ans(std::vector<double>(10, 0.1)) - 0.6513215599) < 1e-10);
  CHECK(kind_of([] { has_ans(std::vector<double>{1.5}); }) == ErrorKind::RangeError);
  CHECK(kind_of([] { has_ans(std::vector<double>{-0.1}); }) == ErrorKind::RangeError);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> ps(1 + t % 12);
    for (auto& x : ps) x = u(gen);
    const double h = has_ans(ps);
    CHECK(h >= *std::max_element(ps.begin(), ps.end()));
    auto more = ps;
    more.push_back(u(gen));
    CHECK(has_ans(more) >= h);
    auto bigger = ps;
    bigger[0] = std::min(1.0, bigger[0] + 0.1);
    CHECK(has_ans(bigger) >= h);
  }
}

TEST_CASE("rank_passages small cases") {
  const auto single = hand_index({{"only", {1.0f, 2.0f}}});
  const auto r = rank_passages(single, std::vector<double>{1, 1}, 5);
  REQUIRE(r.entries.size() == 1);
  CHECK(r.entries[0].has_ans_probability == 1.0);
  CHECK(r.retrieved_sentences == 1);

  // Scores chosen so the softmax gives A two sentences at 0.3 and B one at 0.4.
  const float a = static_cast<float>(std::log(0.3)), b = static_cast<float>(std::log(0.4));
  const auto idx = hand_index({{"A", {a}}, {"A", {a}}, {"B", {b}}});
  const auto ranked = rank_passages(idx, std::vector<double>{1.0}, 3);
  REQUIRE(ranked.entries.size() == 2);
  CHECK(ranked.entries[0].passage_id == "A");
  CHECK(ranked.entries[0].has_ans_probability == doctest::Approx(0.51).epsilon(1e-6));
  CHECK(ranked.entries[1].has_ans_probability == doctest::Approx(0.40).epsilon(1e-6));
  double total = 0.0;
  for (const auto& e : ranked.entries) {
    for (const auto& s : e.sentences) total += s.probability;
  }
  CHECK(std::abs(total - 1.0) < 1e-9);

  // Only the retrieved sentences take part.
  const auto shallow = rank_passages(idx, std::vector<double>{1.0}, 1);
  REQUIRE(shallow.entries.size() == 1);
  CHECK(shallow.entries[0].passage_id == "B");
  CHECK(shallow.entries[0].has_ans_probability == 1.0);

  const auto limited = rank_passages(idx, std::vector<double>{1.0}, 3, 5);
  CHECK(limited.shortfall);
}

TEST_CASE("rank_passages equals the brute-force pipeline") {
  std::mt19937_64 gen(31);
  for (int t = 0; t < 4; ++t) {
    const auto idx = testgen::random_index(gen, 800 + 300 * t, 5, 64);
    for (int qn = 0; qn < 3; ++qn) {
      const auto q = testgen::random_vector(gen, 64, 0.3);
      const std::size_t depth = idx.default_depth();
      const auto got = rank_passages(idx, q, depth);
      const auto want = oracle::rank(idx, q, depth);
      REQUIRE(got.entries.size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(got.entries[i].passage_id == want[i].passage_id);
        CHECK(std::abs(got.entries[i].has_ans_probability - static_cast<double>(want[i].probability)) < 1e-10);
      }
    }
  }
}

TEST_CASE("one sentence per passage reduces to raw inner-product order") {
  std::mt19937_64 gen(41);
  for (int t = 0; t < 5; ++t) {
    const auto idx = testgen::random_index(gen, 500, 1, 16);
    const auto q = testgen::random_vector(gen, 16);
    const auto ranked = rank_passages(idx, q, idx.size());
    const auto hits = search(idx, q, idx.size());
    REQUIRE(ranked.entries.size() == hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) CHECK(ranked.entries[i].passage_id == hits[i].key.passage_id);
  }
}

TEST_CASE("passage vector baseline") {
  const auto idx = hand_index({{"A", {1.0f, 0.0f}}, {"A", {0.0f, 1.0f}}, {"B", {0.4f, 0.4f}}});
  const PassageVectorIndex pv(idx);
  CHECK(pv.size() == 2);
  const auto r = pv.rank(std::vector<double>{1.0, 1.0}, 2);
  REQUIRE(r.size() == 2);
  CHECK(r[0].first == "A");
  CHECK(r[0].second == doctest::Approx(1.0));
  CHECK(r[1].second == doctest::Approx(0.8));
}

TEST_CASE("evaluate against the brute-force scorer") {
  const auto corpus = synthesize(SynthSpec{.passages = 40, .seed = 6});
  const auto params = EncoderParams::initialize(16, 4096, 0.7, 2);
  const PassageStore store(corpus.passages);
  const auto idx = build_index(corpus.passages, params);
  std::vector<QAExample> data(corpus.examples.begin(), corpus.examples.begin() + 50);
  const auto report = evaluate(data, idx, params, store, {.ks = {1, 5, 20, 100}});
  const auto want = oracle_eval(data, idx, params, store, {1, 5, 20, 100});
  CHECK(report.questions == 50);
  CHECK(report.corpus_sentences == 120);
  for (auto [k, v] : want) CHECK(report.top_k_accuracy.at(k) == doctest::Approx(v).epsilon(1e-15));
  double prev = 0.0;
  for (auto [k, v] : report.top_k_accuracy) {
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(report.top_k_accuracy.at(100) == 1.0);

  // Insertion order does not matter.
  auto shuffled = corpus.passages;
  std::mt19937_64 gen(1);
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const auto again = evaluate(data, build_index(shuffled, params), params, store, {.ks = {1, 5, 20, 100}});
  CHECK(again.top_k_accuracy == report.top_k_accuracy);

  // Without the answer-bearing passages nothing can match.
  std::vector<Passage> stripped;
  for (const auto& p : corpus.passages) {
    if (!passage_contains_answer(p, data[0].answers)) stripped.push_back(p);
  }
  const std::vector<QAExample> first{data[0]};
  const auto none = evaluate(first, build_index(stripped, params), params, PassageStore(stripped));
  for (auto [k, v] : none.top_k_accuracy) CHECK(v == 0.0);

  const auto j = parse_eval_report(eval_report_json(report));
  CHECK(j.top_k_accuracy == report.top_k_accuracy);
  CHECK(j.questions == report.questions);

  const auto passage_level = evaluate(data, idx, params, store, {.granularity = Granularity::Passage});
  CHECK(passage_level.top_k_accuracy.at(100) == 1.0);
}

TEST_CASE("evaluate is perfect when retrieval is perfect") {
  // One passage per question whose only sentence equals the question; with
  // identity-like features the question's own sentence wins.
  std::vector<Passage> ps;
  std::vector<QAExample> data;
  for (int i = 0; i < 5; ++i) {
    const std::string tok = "token" + std::string(1, static_cast<char>('a' + i)) + "zz" + std::to_string(i * 37);
    ps.push_back(make_passage("t", "Answer " + tok + " lives here."));
    QAExample e;
    e.question = "Answer " + tok + " lives here.";
    e.answers = {tok};
    e.positives = {label_answers(ps.back(), e.answers)};
    data.push_back(e);
  }
  auto params = EncoderParams::initialize(1024, 1024, 1.0, 1);
  // Identity towers: vectors are the feature vectors themselves.
  std::fill(params.question_projection.begin(), params.question_projection.end(), 0.0);
  for (std::size_t f = 0; f < 1024; ++f) params.question_at(f, f) = 1.0;
  params.context_projection = params.question_projection;
  const auto report = evaluate(data, build_index(ps, params), params, PassageStore(ps), {.ks = {1, 5}});
  CHECK(report.top_k_accuracy.at(1) == 1.0);
  CHECK(report.top_k_accuracy.at(5) == 1.0);
}

TEST_CASE("hard negative mining") {
  const auto corpus = synthesize(SynthSpec{.passages = 30, .seed = 9});
  const auto params = EncoderParams::initialize(16, 4096, 0.7, 3);
  const PassageStore store(corpus.passages);
  const auto idx = build_index(corpus.passages, params);

  const auto same = mine_hard_negatives(corpus.examples, idx, params, store, {.per_question = 0});
  CHECK(same.examples == corpus.examples);
  CHECK(same.mined == 0);

  const auto mined = mine_hard_negatives(corpus.examples, idx, params, store, {.per_question = 2});
  REQUIRE(mined.examples.size() == corpus.examples.size());
  CHECK(mined.mined == 2 * corpus.examples.size() - 0);
  for (std::size_t i = 0; i < mined.examples.size(); ++i) {
    const auto& e = mined.examples[i];
    CHECK(e.question == corpus.examples[i].question);
    CHECK(e.positives == corpus.examples[i].positives);
    REQUIRE(e.bm25_negatives.size() == 2);
    for (const auto& n : e.bm25_negatives) {
      REQUIRE(n.sentences.size() == 1);
      // Every passage holding this sentence is answer-free.
      bool found = false;
      for (const auto& p : corpus.passages) {
        for (const auto& s : p.sentences) {
          if (s.text != n.sentences[0].text) continue;
          found = true;
          CHECK(!oracle_contains(p, e.answers));
        }
      }
      CHECK(found);
    }
  }
  const auto augmented =
      mine_hard_negatives(corpus.examples, idx, params, store, {.per_question = 1, .mode = MiningMode::Augment});
  for (std::size_t i = 0; i < augmented.examples.size(); ++i) {
    CHECK(augmented.examples[i].bm25_negatives.size() == corpus.examples[i].bm25_negatives.size() + 1);
  }
  // Deterministic.
  CHECK(mine_hard_negatives(corpus.examples, idx, params, store, {.per_question = 2}).examples == mined.examples);
}

TEST_CASE("question whose best hit is gold mines the next one") {
  // Rows: gold passage first, then two negatives.
  std::vector<Passage> ps{make_passage("g", "Gold xyzzy here."), make_passage("n", "Plain words one."),
                          make_passage("m", "Plain words two.")};
  QAExample e;
  e.question = "Gold xyzzy here.";
  e.answers = {"xyzzy"};
  e.positives = {label_answers(ps[0], e.answers)};
  auto params = EncoderParams::initialize(1024, 1024, 1.0, 1);
  std::fill(params.question_projection.begin(), params.question_projection.end(), 0.0);
  for (std::size_t f = 0; f < 1024; ++f) params.question_at(f, f) = 1.0;
  params.context_projection = params.question_projection;
  const auto idx = build_index(ps, params);
  const auto r = mine_hard_negatives({e}, idx, params, PassageStore(ps), {.per_question = 1});
  REQUIRE(r.examples[0].bm25_negatives.size() == 1);
  CHECK(r.examples[0].bm25_negatives[0].sentences[0].text.rfind("Plain words", 0) == 0);

  // Only gold available: nothing mined, original negatives kept and counted.
  const std::vector<Passage> gold_only{ps[0]};
  e.bm25_negatives = {ps[1]};
  const auto none = mine_hard_negatives({e}, build_index(gold_only, params), params, PassageStore(gold_only),
                                        {.per_question = 1});
  CHECK(none.questions_without_mined == 1);
  CHECK(none.examples[0].bm25_negatives == e.bm25_negatives);
}

TEST_CASE("subsample corpus") {
  const auto corpus = synthesize(SynthSpec{.passages = 10, .seed = 1}).passages;
  CHECK(subsample_corpus(corpus, FirstN{10}) == corpus);
  const auto three = subsample_corpus(corpus, FirstN{3});
  REQUIRE(three.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(three[i] == corpus[i]);
  CHECK(kind_of([&] { subsample_corpus(corpus, FirstN{11}); }) == ErrorKind::RangeError);
  CHECK(kind_of([&] { subsample_corpus(corpus, FirstN{0}); }) == ErrorKind::RangeError);
  const auto a = subsample_corpus(corpus, Fraction{0.5, 4});
  CHECK(a.size() == 5);
  CHECK(a == subsample_corpus(corpus, Fraction{0.5, 4}));
  CHECK(kind_of([&] { subsample_corpus(corpus, Fraction{1.5, 4}); }) == ErrorKind::RangeError);
}

}  // TEST_SUITE
