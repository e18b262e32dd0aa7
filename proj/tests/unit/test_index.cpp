#include <doctest.h>

#include <fstream>

#include "dcsr/errors.hpp"
#include "dcsr/index.hpp"
#include "dcsr/kernels.hpp"
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

}  // namespace

TEST_SUITE("index") {

TEST_CASE("build from passages") {
  std::vector<Passage> ps{make_passage("a", "One. Two. Three."), make_passage("b", "Four. Five. Six.")};
  const auto params = EncoderParams::initialize(8, 1024, 0.7, 1);
  const auto idx = build_index(ps, params);
  CHECK(idx.size() == 6);
  CHECK(idx.distinct_passages() == 2);
  CHECK(idx.avg_sentences_per_passage() == 3.0);
  CHECK(idx.default_depth() == 300);
  CHECK(idx.keys()[4] == SentenceKey{ps[1].id, 1});
  const auto enc = encode_passage(ps[1], params);
  for (std::size_t d = 0; d < 8; ++d) CHECK(idx.row(4)[d] == static_cast<float>(enc[1][d]));
  CHECK(build_index(ps, params) == idx);
  // A repeated passage id is indexed once.
  ps.push_back(ps[0]);
  CHECK(build_index(ps, params).size() == 6);
}

TEST_CASE("constructor checks") {
  CHECK(kind_of([] { SentenceIndex(2, {{"a", 0}}, {1.0f}); }) == ErrorKind::DimensionError);
  CHECK(kind_of([] { SentenceIndex(1, {{"a", 0}, {"a", 0}}, {1.0f, 2.0f}); }) == ErrorKind::RangeError);
}

TEST_CASE("search on an orthonormal set") {
  std::vector<SentenceKey> keys;
  std::vector<float> v;
  for (std::uint32_t i = 0; i < 4; ++i) {
    keys.push_back({"p" + std::to_string(i), 0});
    for (std::uint32_t d = 0; d < 4; ++d) v.push_back(d == i ? 1.0f : 0.0f);
  }
  const SentenceIndex idx(4, keys, v);
  const std::vector<double> q{0, 0, 1, 0};
  const auto hits = search(idx, q, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].key.passage_id == "p2");
  CHECK(hits[0].score == 1.0);
  // Remaining rows tie at zero; the smallest key comes first.
  CHECK(hits[1].key.passage_id == "p0");
  CHECK(search(idx, q, 10).size() == 4);
  CHECK(kind_of([&] { search(idx, std::vector<double>{1, 0}, 1); }) == ErrorKind::DimensionError);
}

TEST_CASE("search equals a full-sort oracle") {
  std::mt19937_64 gen(21);
  const auto idx = testgen::random_index(gen, 3000, 6, 64);
  REQUIRE(idx.size() > 3000);
  for (int t = 0; t < 5; ++t) {
    const auto q = testgen::random_vector(gen, 64);
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < 64; ++d) s += static_cast<double>(idx.row(i)[d]) * q[d];
      all.push_back({s, i});
    }
    std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return idx.keys()[a.second] < idx.keys()[b.second];
    });
    const auto hits = search(idx, q, idx.size());
    REQUIRE(hits.size() == idx.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].row == all[i].second);
      CHECK(hits[i].score == all[i].first);
    }
    const auto top = search(idx, q, 50);
    for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].score >= top[i].score);
  }
}

TEST_CASE("persistence round trip") {
  const auto dir = testgen::scratch_dir("index_io");
  std::mt19937_64 gen(3);
  const auto idx = testgen::random_index(gen, 200, 4, 16);
  save_index(dir / "a.idx", idx);
  const auto back = load_index(dir / "a.idx");
  CHECK(back == idx);
  for (int t = 0; t < 100; ++t) {
    const auto q = testgen::random_vector(gen, 16);
    const auto a = search(idx, q, 20), b = search(back, q, 20);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].row == b[i].row);
      CHECK(a[i].score == b[i].score);
    }
  }

  export_vectors(dir / "v.bin", idx);
  CHECK(import_vectors(dir / "v.bin") == idx);
  CHECK(kind_of([&] { load_index(dir / "v.bin"); }) == ErrorKind::IndexFormatError);
  CHECK(kind_of([&] { import_vectors(dir / "a.idx"); }) == ErrorKind::IndexFormatError);

  std::filesystem::copy_file(dir / "a.idx", dir / "short.idx");
  std::filesystem::resize_file(dir / "short.idx", std::filesystem::file_size(dir / "short.idx") - 5);
  CHECK(kind_of([&] { load_index(dir / "short.idx"); }) == ErrorKind::IndexFormatError);

  std::filesystem::copy_file(dir / "a.idx", dir / "ver.idx");
  {
    std::fstream f(dir / "ver.idx", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v = 2;
    f.write(&v, 1);
  }
  CHECK(kind_of([&] { load_index(dir / "ver.idx"); }) == ErrorKind::IndexFormatError);
  CHECK(kind_of([&] { load_index(dir / "missing.idx"); }) == ErrorKind::IoError);
}

TEST_CASE("import of five external vectors") {
  const auto dir = testgen::scratch_dir("index_vec");
  std::vector<SentenceKey> keys;
  std::vector<float> v;
  for (std::uint32_t i = 0; i < 5; ++i) {
    keys.push_back({"ext", i});
    for (int d = 0; d < 3; ++d) v.push_back(static_cast<float>(i + d));
  }
  export_vectors(dir / "five.vec", SentenceIndex(3, keys, v));
  const auto idx = import_vectors(dir / "five.vec");
  CHECK(idx.size() == 5);
  CHECK(idx.distinct_passages() == 1);
}

TEST_CASE("external vectors match an encoder-built index") {
  const auto corpus = synthesize(SynthSpec{.passages = 10, .seed = 2});
  const auto params = EncoderParams::initialize(8, 1024, 0.7, 4);
  const auto idx = build_index(corpus.passages, params);
  const auto dir = testgen::scratch_dir("index_ext");
  export_vectors(dir / "v.bin", idx);
  const auto ext = import_vectors(dir / "v.bin");
  const auto q = encode_question(corpus.examples[0].question, params);
  const auto a = search(idx, q, 10), b = search(ext, q, 10);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].key == b[i].key);
}

}  // TEST_SUITE

TEST_SUITE("kernels") {

TEST_CASE("parallel kernels equal the serial reference") {
  std::mt19937_64 gen(17);
  std::normal_distribution<float> n;
  const std::size_t dim = 32, rows = 5000, queries = 7;
  std::vector<float> m(rows * dim);
  for (auto& x : m) x = n(gen);
  std::vector<double> qs(queries * dim);
  for (auto& x : qs) x = n(gen);
  for (int threads : {1, 2, 4}) {
    kernels::set_threads(threads);
    std::vector<double> a(rows), b(rows);
    kernels::inner_products_serial(m, dim, std::span<const double>(qs).first(dim), a);
    kernels::inner_products(m, dim, std::span<const double>(qs).first(dim), b);
    CHECK(a == b);
    std::vector<double> sa(rows * queries), sb(rows * queries);
    kernels::score_matrix_serial(m, dim, qs, sa);
    kernels::score_matrix(m, dim, qs, sb);
    CHECK(sa == sb);
  }
  kernels::set_threads(kernels::max_threads());
}

TEST_CASE("select_top orders by score then tie rank") {
  const std::vector<double> s{1.0, 3.0, 3.0, 2.0, 3.0};
  const std::vector<std::size_t> rank{4, 3, 0, 1, 2};
  CHECK(kernels::select_top(s, rank, 3) == std::vector<std::size_t>{2, 4, 1});
  CHECK(kernels::select_top(s, rank, 10).size() == 5);
}

}  // TEST_SUITE
