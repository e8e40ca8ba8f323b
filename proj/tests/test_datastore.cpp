#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "uniret/datastore.hpp"
#include "uniret/error.hpp"

using namespace uniret;

namespace {

std::vector<CorpusRecord> text_corpus(int n) {
  std::vector<CorpusRecord> corpus(n);
  for (int i = 0; i < n; ++i) {
    corpus[i].docid = "d" + std::to_string(i);
    corpus[i].text = "document body " + std::to_string(i);
  }
  return corpus;
}

QueryRecord make_query(const std::string& id, std::vector<std::string> pos,
                       std::vector<std::string> neg) {
  QueryRecord q;
  q.query_id = id;
  q.text = "query " + id;
  q.positive_ids = std::move(pos);
  q.negative_ids = std::move(neg);
  return q;
}

}  // namespace

TEST_CASE("store lookup by id and duplicate rejection") {
  CorpusStore store(text_corpus(3), "");
  CHECK(store.size() == 3);
  CHECK(store.by_id("d2").text == "document body 2");
  CHECK(store.contains("d0"));
  CHECK(!store.contains("zzz"));
  CHECK_THROWS_AS(store.by_id("zzz"), Error);

  auto dup = text_corpus(2);
  dup[1].docid = "d0";
  CHECK_THROWS_AS(CorpusStore(dup, ""), Error);
}

TEST_CASE("store build never touches media bytes") {
  std::vector<CorpusRecord> corpus(1);
  corpus[0].docid = "d0";
  corpus[0].image = "does/not/exist.png";
  CorpusStore store(corpus, "/nonexistent-root");  // must not throw
  CHECK(store.size() == 1);
  // the failure surfaces only when the payload is actually loaded
  CHECK_THROWS_AS(store.media().load("does/not/exist.png"), Error);
}

TEST_CASE("resolve_group picks listed negatives deterministically") {
  CorpusStore store(text_corpus(10), "");
  const QueryRecord q = make_query("q", {"d0"}, {"d1", "d2", "d3", "d4", "d5"});
  Rng r1 = Rng::derive(5, {1});
  Rng r2 = Rng::derive(5, {1});
  const TrainGroup g1 = resolve_group(store, q, 3, r1);
  const TrainGroup g2 = resolve_group(store, q, 3, r2);
  CHECK(g1.positive->docid == "d0");
  REQUIRE(g1.negatives.size() == 3);
  CHECK(!g1.padded);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(g1.negatives[i]->docid == g2.negatives[i]->docid);
  std::set<std::string> listed{"d1", "d2", "d3", "d4", "d5"};
  std::set<std::string> chosen;
  for (const auto* n : g1.negatives) {
    CHECK(listed.count(n->docid) == 1);
    chosen.insert(n->docid);
  }
  CHECK(chosen.size() == 3);  // without replacement
}

TEST_CASE("resolve_group pads from the corpus and never picks positives") {
  CorpusStore store(text_corpus(10), "");
  const QueryRecord q = make_query("q", {"d0"}, {"d1"});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = Rng::derive(seed, {2});
    const TrainGroup g = resolve_group(store, q, 3, rng);
    REQUIRE(g.negatives.size() == 3);
    CHECK(g.padded);
    CHECK(g.negatives[0]->docid == "d1");  // the listed one is always taken
    std::set<std::string> ids;
    for (const auto* n : g.negatives) {
      CHECK(n->docid != "d0");
      ids.insert(n->docid);
    }
    CHECK(ids.size() == 3);
  }
  // repeatability under one seed
  Rng ra = Rng::derive(3, {2});
  Rng rb = Rng::derive(3, {2});
  const TrainGroup ga = resolve_group(store, q, 3, ra);
  const TrainGroup gb = resolve_group(store, q, 3, rb);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(ga.negatives[i]->docid == gb.negatives[i]->docid);
}

TEST_CASE("resolve_group error cases") {
  CorpusStore store(text_corpus(2), "");
  Rng rng(1);
  const QueryRecord dangling = make_query("q", {"ghost"}, {});
  CHECK_THROWS_AS(resolve_group(store, dangling, 1, rng), Error);

  // corpus minus positives empty: 2 docs, both positive, needs padding
  const QueryRecord saturated = make_query("q", {"d0", "d1"}, {});
  try {
    resolve_group(store, saturated, 1, rng);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCorpusFallback);
  }
}

TEST_CASE("multiple positives: one is sampled uniformly per resolution") {
  CorpusStore store(text_corpus(4), "");
  const QueryRecord q = make_query("q", {"d0", "d1", "d2"}, {"d3"});
  std::map<std::string, int> counts;
  for (std::uint64_t s = 0; s < 300; ++s) {
    Rng rng = Rng::derive(s, {7});
    counts[resolve_group(store, q, 1, rng).positive->docid]++;
  }
  CHECK(counts.size() == 3);
  for (const auto& [id, n] : counts) CHECK(n > 60);  // roughly uniform thirds
}

TEST_CASE("epoch plan covers every query once in homogeneous batches") {
  std::vector<EpochDataset> specs{{"a", 256, 1.0}};
  Rng rng(1);
  const auto plan = plan_epoch(specs, 128, rng);
  REQUIRE(plan.size() == 2);
  std::set<std::size_t> seen;
  for (const auto& b : plan) {
    CHECK(b.dataset_index == 0);
    CHECK(b.query_indices.size() == 128);
    for (const auto i : b.query_indices) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 256);
}

TEST_CASE("epoch plan keeps the final partial batch") {
  std::vector<EpochDataset> specs{{"a", 300, 1.0}};
  Rng rng(2);
  const auto plan = plan_epoch(specs, 128, rng);
  REQUIRE(plan.size() == 3);
  std::multiset<std::size_t> sizes;
  for (const auto& b : plan) sizes.insert(b.query_indices.size());
  CHECK(sizes == std::multiset<std::size_t>{44, 128, 128});
}

TEST_CASE("two equal datasets at batch size produce one batch each") {
  std::vector<EpochDataset> specs{{"a", 128, 1.0}, {"b", 128, 1.0}};
  Rng rng(3);
  const auto plan = plan_epoch(specs, 128, rng);
  REQUIRE(plan.size() == 2);
  std::set<std::size_t> datasets{plan[0].dataset_index, plan[1].dataset_index};
  CHECK(datasets == std::set<std::size_t>{0, 1});
}

TEST_CASE("first batch favors the heavier dataset at its weight share") {
  // weights 3:1, equal sizes -> dataset 0 first with p = 0.75
  std::vector<EpochDataset> specs{{"a", 128, 3.0}, {"b", 128, 1.0}};
  int first_a = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::derive(static_cast<std::uint64_t>(t), {4});
    const auto plan = plan_epoch(specs, 128, rng);
    if (plan.front().dataset_index == 0) ++first_a;
  }
  const double freq = static_cast<double>(first_a) / trials;
  CHECK(freq == doctest::Approx(0.75).epsilon(0.04));
}

TEST_CASE("epoch planning is deterministic and rejects empty datasets") {
  std::vector<EpochDataset> specs{{"a", 50, 1.0}, {"b", 70, 2.0}};
  Rng r1 = Rng::derive(9, {1});
  Rng r2 = Rng::derive(9, {1});
  const auto p1 = plan_epoch(specs, 16, r1);
  const auto p2 = plan_epoch(specs, 16, r2);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].dataset_index == p2[i].dataset_index);
    CHECK(p1[i].query_indices == p2[i].query_indices);
  }

  std::vector<EpochDataset> empty{{"bad", 0, 1.0}};
  Rng rng(1);
  CHECK_THROWS_AS(plan_epoch(empty, 16, rng), Error);
}

TEST_CASE("collate lays out documents and targets per contract") {
  CorpusStore store(text_corpus(6), "");
  Rng rng(1);
  const std::vector<QueryRecord> queries{make_query("q0", {"d0"}, {"d1"}),
                                         make_query("q1", {"d2"}, {"d3"})};
  std::vector<TrainGroup> groups;
  for (const auto& q : queries) groups.push_back(resolve_group(store, q, 1, rng));

  const Featurizer feat = [](const Payloads& p) { return featurize_bytes(*p.text, 512); };
  const TrainBatch batch = collate(groups, feat, 1);
  CHECK(batch.queries.size() == 2);
  CHECK(batch.documents.size() == 4);  // B(1+m) with B=2, m=1
  CHECK(batch.targets == std::vector<std::size_t>{0, 2});
  CHECK(batch.feature_width == 512);
  CHECK(batch.negatives_per_query == 1);
}

TEST_CASE("collate handles the reference batch geometry") {
  // 128 queries with 1 positive + 3 negatives -> 512 document vectors
  CorpusStore store(text_corpus(600), "");
  std::vector<QueryRecord> queries;
  for (int i = 0; i < 128; ++i) {
    queries.push_back(make_query("q" + std::to_string(i), {"d" + std::to_string(i)},
                                 {"d" + std::to_string(i + 128), "d" + std::to_string(i + 256),
                                  "d" + std::to_string(i + 384)}));
  }
  std::vector<TrainGroup> groups;
  for (int i = 0; i < 128; ++i) {
    Rng rng = Rng::derive(static_cast<std::uint64_t>(i), {5});
    groups.push_back(resolve_group(store, queries[static_cast<std::size_t>(i)], 3, rng));
  }
  const Featurizer feat = [](const Payloads& p) { return featurize_bytes(*p.text, 256); };
  const TrainBatch batch = collate(groups, feat, 4);
  CHECK(batch.queries.size() == 128);
  CHECK(batch.documents.size() == 512);
  for (std::size_t i = 0; i < 128; ++i) CHECK(batch.targets[i] == i * 4);
}

TEST_CASE("collate treats text and media payloads alike") {
  testutil::TempDir dir("collate-media");
  testutil::write_text(dir.file("pic.bin"), "media only payload");

  std::vector<CorpusRecord> corpus(4);
  corpus[0].docid = "t0";
  corpus[0].text = "text payload";
  corpus[1].docid = "t1";
  corpus[1].text = "other text";
  corpus[2].docid = "m0";
  corpus[2].image = "pic.bin";
  corpus[3].docid = "m1";
  corpus[3].image = "pic.bin";
  CorpusStore store(corpus, dir.path().string());

  QueryRecord tq = make_query("tq", {"t0"}, {"t1"});
  QueryRecord mq = make_query("mq", {"m0"}, {"m1"});
  mq.text.reset();
  mq.image = "pic.bin";

  Rng rng(1);
  std::vector<TrainGroup> groups;
  groups.push_back(resolve_group(store, tq, 1, rng));
  groups.push_back(resolve_group(store, mq, 1, rng));

  MediaLoader& media = store.media();
  const Featurizer feat = [&media](const Payloads& p) {
    return featurize_payloads(p, media, 1024);
  };
  const TrainBatch batch = collate(groups, feat, 2);
  for (const auto& v : batch.queries) CHECK(v.width == 1024);
  for (const auto& v : batch.documents) CHECK(v.width == 1024);
}

TEST_CASE("group negatives never intersect the positive set") {
  CorpusStore store(text_corpus(30), "");
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> pos{"d" + std::to_string(gen() % 30)};
    std::vector<std::string> neg;
    for (int i = 0; i < 2; ++i) {
      const std::string id = "d" + std::to_string(gen() % 30);
      if (id != pos[0] && std::find(neg.begin(), neg.end(), id) == neg.end()) neg.push_back(id);
    }
    Rng rng = Rng::derive(static_cast<std::uint64_t>(trial), {6});
    const QueryRecord q = make_query("q", pos, neg);
    const TrainGroup g = resolve_group(store, q, 4, rng);
    for (const auto* n : g.negatives) CHECK(n->docid != pos[0]);
  }
}
