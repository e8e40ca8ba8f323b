#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "uniret/error.hpp"
#include "uniret/index.hpp"

using namespace uniret;

namespace {

EmbeddingIndex manual_index(std::uint32_t dim, std::vector<std::string> docids,
                            std::vector<float> rows) {
  EmbeddingIndex ix;
  ix.dim = dim;
  ix.docids = std::move(docids);
  ix.rows = std::move(rows);
  return ix;
}

// Full-sort reference search, written independently: truncate/renormalize in
// double when a prefix dim is given, score all rows, sort by (score desc,
// docid asc), cut at k.
std::vector<std::pair<std::string, double>> oracle_search(const EmbeddingIndex& ix,
                                                          const std::vector<double>& query,
                                                          std::size_t k,
                                                          std::optional<std::uint32_t> dim) {
  std::vector<double> q(query.begin(), query.end());
  if (dim) {
    q.resize(*dim);
    double n = 0.0;
    for (double v : q) n += v * v;
    n = std::sqrt(n);
    for (double& v : q) v /= n;
  }
  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t i = 0; i < ix.size(); ++i) {
    const auto row = ix.row(i);
    std::vector<double> r(row.begin(), row.end());
    if (dim) {
      r.resize(*dim);
      double n = 0.0;
      for (double v : r) n += v * v;
      n = std::sqrt(n);
      for (double& v : r) v /= n;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * r[j];
    scored.emplace_back(ix.docids[i], s);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

}  // namespace

TEST_CASE("corpus encoding assigns documents to shards by position modulo count") {
  const auto task = testutil::make_synth_task(5, 24, 1, 3);
  CorpusStore store(task.corpus, "");
  const ModelParams p = init_params(8, 64, 0.02, {}, 1);

  const EmbeddingIndex whole = encode_corpus(p, store, 0, 1, 2, 2);
  REQUIRE(whole.size() == 5);
  CHECK(whole.docids == std::vector<std::string>{"d0", "d1", "d2", "d3", "d4"});

  const EmbeddingIndex s0 = encode_corpus(p, store, 0, 2, 2, 2);
  const EmbeddingIndex s1 = encode_corpus(p, store, 1, 2, 2, 2);
  CHECK(s0.docids == std::vector<std::string>{"d0", "d2", "d4"});
  CHECK(s1.docids == std::vector<std::string>{"d1", "d3"});

  // every shard row is bit-identical to the corresponding unsharded row
  for (std::size_t i = 0; i < s0.size(); ++i)
    CHECK(std::memcmp(s0.row(i).data(), whole.row(2 * i).data(), 8 * sizeof(float)) == 0);
  for (std::size_t i = 0; i < s1.size(); ++i)
    CHECK(std::memcmp(s1.row(i).data(), whole.row(2 * i + 1).data(), 8 * sizeof(float)) == 0);
}

TEST_CASE("corpus encoding is bit-identical across reruns and thread counts") {
  const auto task = testutil::make_synth_task(12, 32, 1, 6);
  CorpusStore store(task.corpus, "");
  const ModelParams p = init_params(16, 128, 0.02, {}, 2);
  const EmbeddingIndex a = encode_corpus(p, store, 0, 1, 4, 1);
  const EmbeddingIndex b = encode_corpus(p, store, 0, 1, 4, 4);
  const EmbeddingIndex c = encode_corpus(p, store, 0, 1, 5, 2);  // batch size must not matter
  CHECK(a.docids == b.docids);
  CHECK(a.rows == b.rows);
  CHECK(a.rows == c.rows);
}

TEST_CASE("merging shards reproduces the unsharded index exactly") {
  const auto task = testutil::make_synth_task(11, 24, 1, 7);
  CorpusStore store(task.corpus, "");
  const ModelParams p = init_params(8, 64, 0.02, {}, 5);
  const EmbeddingIndex whole = encode_corpus(p, store, 0, 1, 4, 2);

  for (std::size_t n : {2u, 3u, 4u}) {
    std::vector<EmbeddingIndex> shards;
    for (std::size_t i = 0; i < n; ++i) shards.push_back(encode_corpus(p, store, i, n, 4, 2));
    const EmbeddingIndex merged = merge_shards(shards);
    CHECK(merged.docids == whole.docids);
    CHECK(merged.rows == whole.rows);
  }
}

TEST_CASE("merge rejects inconsistent shard sets") {
  const EmbeddingIndex a = manual_index(2, {"a", "c"}, {1, 0, 0, 1});
  const EmbeddingIndex b = manual_index(2, {"b"}, {0, 1});
  const EmbeddingIndex wrong_dim = manual_index(4, {"b"}, {0, 1, 0, 0});
  const EmbeddingIndex dup = manual_index(2, {"a"}, {1, 0});

  {
    std::vector<EmbeddingIndex> ok{a, b};
    const EmbeddingIndex merged = merge_shards(ok);
    CHECK(merged.docids == std::vector<std::string>{"a", "b", "c"});
  }
  {
    std::vector<EmbeddingIndex> shards{a, wrong_dim};
    CHECK_THROWS_AS(merge_shards(shards), Error);
  }
  {
    // sizes {1, 2} violate the round-robin layout for 3 documents
    std::vector<EmbeddingIndex> shards{b, a};
    CHECK_THROWS_AS(merge_shards(shards), Error);
  }
  {
    std::vector<EmbeddingIndex> shards{a, dup};
    CHECK_THROWS_AS(merge_shards(shards), Error);
  }
}

TEST_CASE("index files round-trip bit-exactly") {
  const auto task = testutil::make_synth_task(7, 24, 1, 9);
  CorpusStore store(task.corpus, "");
  const ModelParams p = init_params(8, 64, 0.02, {}, 3);
  const EmbeddingIndex ix = encode_corpus(p, store, 0, 1, 4, 2);

  std::stringstream buf;
  write_index(buf, ix);
  const std::string bytes = buf.str();
  std::stringstream in(bytes);
  const EmbeddingIndex back = read_index(in);
  CHECK(back.dim == ix.dim);
  CHECK(back.docids == ix.docids);
  REQUIRE(back.rows.size() == ix.rows.size());
  CHECK(std::memcmp(back.rows.data(), ix.rows.data(), ix.rows.size() * sizeof(float)) == 0);

  std::stringstream buf2;
  write_index(buf2, back);
  CHECK(buf2.str() == bytes);

  testutil::TempDir dir("index-io");
  save_index(dir.file("x.urix"), ix);
  const EmbeddingIndex loaded = load_index(dir.file("x.urix"));
  CHECK(loaded.docids == ix.docids);
  CHECK(loaded.rows == ix.rows);
  CHECK_THROWS_AS(load_index(dir.file("missing.urix")), Error);
}

TEST_CASE("index reader rejects corrupted files") {
  const EmbeddingIndex ix = manual_index(2, {"aa", "ab"}, {1, 0, 0, 1});
  std::stringstream buf;
  write_index(buf, ix);
  const std::string good = buf.str();

  const auto kind_of = [](const std::string& bytes) -> std::optional<ErrorKind> {
    std::stringstream in(bytes);
    try {
      read_index(in);
      return std::nullopt;
    } catch (const Error& e) {
      return e.kind();
    }
  };

  std::string bad_magic = good;
  bad_magic[0] = 'Z';
  CHECK(kind_of(bad_magic) == ErrorKind::BadMagic);

  std::string bad_version = good;
  bad_version[4] = 9;
  bad_version[5] = 0;
  CHECK(kind_of(bad_version) == ErrorKind::VersionMismatch);

  CHECK(kind_of(good.substr(0, good.size() - 2)) == ErrorKind::TruncatedFile);
  CHECK(kind_of(good + "!") == ErrorKind::CountMismatch);

  // duplicate docid injected into the serialized table
  std::string dup = good;
  const std::size_t where = dup.find("ab");
  REQUIRE(where != std::string::npos);
  dup[where + 1] = 'a';
  CHECK(kind_of(dup) == ErrorKind::DuplicateDocId);

  // writing an index with duplicate docids is rejected up front
  const EmbeddingIndex bad = manual_index(2, {"aa", "aa"}, {1, 0, 0, 1});
  std::stringstream sink;
  CHECK_THROWS_AS(write_index(sink, bad), Error);
}

TEST_CASE("equal scores are broken by ascending docid") {
  const float y = std::sqrt(1.0f - 0.81f);
  const float w = std::sqrt(1.0f - 0.01f);
  const EmbeddingIndex ix =
      manual_index(2, {"b", "a", "a2"}, {0.9f, y, 0.1f, w, 0.9f, -y});
  const std::vector<double> q{1.0, 0.0};

  const auto hits = search(ix, q, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].docid == "a2");  // ties at 0.9 resolve to the smaller docid
  CHECK(hits[1].docid == "b");
  CHECK(hits[0].score == hits[1].score);
  CHECK(hits[0].rank == 1);
  CHECK(hits[1].rank == 2);

  // k beyond the corpus clamps
  const auto all = search(ix, q, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[2].docid == "a");
  CHECK(all[2].rank == 3);
}

TEST_CASE("search validates its arguments") {
  const EmbeddingIndex ix = manual_index(2, {"a"}, {1, 0});
  const std::vector<double> q{1.0, 0.0};
  CHECK_THROWS_AS(search(ix, q, 0), Error);
  CHECK_THROWS_AS(search(ix, std::vector<double>{1.0}, 1), Error);
  CHECK_THROWS_AS(search(ix, q, 1, 0u), Error);
  CHECK_THROWS_AS(search(ix, q, 1, 3u), Error);
  search(ix, q, 1, 2u);  // dim == full width is allowed
}

TEST_CASE("search agrees with a full-sort oracle at every k and prefix dim") {
  const auto task = testutil::make_synth_task(40, 32, 2, 13);
  CorpusStore store(task.corpus, "");
  const ModelParams p = init_params(16, 128, 0.02, {}, 8);
  const EmbeddingIndex ix = encode_corpus(p, store, 0, 1, 8, 2);

  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> q(16);
    double n = 0.0;
    for (auto& v : q) {
      v = std::normal_distribution<double>()(gen);
      n += v * v;
    }
    n = std::sqrt(n);
    for (auto& v : q) v /= n;

    for (const std::size_t k : {std::size_t(1), std::size_t(5), std::size_t(40)}) {
      for (const std::optional<std::uint32_t> dim :
           {std::optional<std::uint32_t>{}, std::optional<std::uint32_t>{8}}) {
        const auto got = search(ix, q, k, dim);
        const auto want = oracle_search(ix, q, k, dim);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
          CHECK(got[i].docid == want[i].first);
          CHECK(got[i].score == doctest::Approx(want[i].second).epsilon(1e-12));
          CHECK(got[i].rank == i + 1);
        }
      }
    }
  }
}

TEST_CASE("batch search is independent of partitioning and thread count") {
  const auto task = testutil::make_synth_task(30, 32, 2, 21);
  CorpusStore store(task.corpus, "");
  const ModelParams p = init_params(16, 128, 0.02, {}, 4);
  const EmbeddingIndex ix = encode_corpus(p, store, 0, 1, 8, 2);

  std::vector<std::vector<double>> queries;
  for (std::size_t i = 0; i < task.queries.size(); ++i) {
    const FeatureVec fv = featurize_bytes(*task.queries[i].text, 128);
    queries.push_back(encode(p, fv));
  }

  const auto base = batch_search(ix, queries, 7, std::nullopt, 1, 1);
  for (const int threads : {2, 4}) {
    for (const std::size_t parts : {std::size_t(2), std::size_t(4), std::size_t(30)}) {
      const auto got = batch_search(ix, queries, 7, std::nullopt, threads, parts);
      REQUIRE(got.size() == base.size());
      for (std::size_t qi = 0; qi < got.size(); ++qi) {
        REQUIRE(got[qi].size() == base[qi].size());
        for (std::size_t i = 0; i < got[qi].size(); ++i) {
          CHECK(got[qi][i].docid == base[qi][i].docid);
          CHECK(got[qi][i].score == base[qi][i].score);
        }
      }
    }
  }
}

TEST_CASE("prefix truncation of an index renormalizes each row") {
  const auto task = testutil::make_synth_task(10, 24, 1, 31);
  CorpusStore store(task.corpus, "");
  const ModelParams p = init_params(16, 128, 0.02, {}, 6);
  const EmbeddingIndex ix = encode_corpus(p, store, 0, 1, 4, 2);
  const EmbeddingIndex cut = truncate_index(ix, 8);
  CHECK(cut.dim == 8);
  CHECK(cut.docids == ix.docids);
  for (std::size_t i = 0; i < cut.size(); ++i) {
    // reference: truncate + renormalize the source row in double precision
    double n = 0.0;
    for (std::size_t j = 0; j < 8; ++j) n += double(ix.row(i)[j]) * double(ix.row(i)[j]);
    n = std::sqrt(n);
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(double(cut.row(i)[j]) == doctest::Approx(double(ix.row(i)[j]) / n).epsilon(1e-6));
  }

  const EmbeddingIndex degenerate = manual_index(2, {"z"}, {0.0f, 1.0f});
  CHECK_THROWS_AS(truncate_index(degenerate, 1), Error);
}

TEST_CASE("zero-norm row prefixes score minus infinity and are reported") {
  const EmbeddingIndex ix = manual_index(2, {"ok", "zz"}, {1.0f, 0.0f, 0.0f, 1.0f});
  const std::vector<double> q{1.0, 0.0};
  std::vector<std::size_t> degenerate;
  const auto hits = search(ix, q, 2, 1u, &degenerate);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].docid == "ok");
  CHECK(hits[1].docid == "zz");
  CHECK(hits[1].score == -std::numeric_limits<double>::infinity());
  REQUIRE(degenerate.size() == 1);
  CHECK(degenerate[0] == 1);
}
