#include <atomic>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "uniret/binio.hpp"
#include "uniret/error.hpp"
#include "uniret/rng.hpp"
#include "uniret/util.hpp"

using namespace uniret;

TEST_CASE("fnv1a64 matches an independent implementation") {
  for (const std::string& s : {std::string(""), std::string("a"), std::string("aaaa"),
                              std::string("hello world"), std::string("\x02碰\x03")}) {
    CHECK(fnv1a64(s) == testutil::reference_fnv1a64(s));
  }
  // spot value: empty input must be the offset basis
  CHECK(fnv1a64("") == 14695981039346656037ULL);
}

TEST_CASE("format_double prints shortest round-trip form") {
  CHECK(format_double(12.5) == "12.5");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  const double awkward = 0.1 + 0.2;
  CHECK(std::stod(format_double(awkward)) == awkward);
}

TEST_CASE("parallel_for covers every index exactly once, any thread count") {
  for (const int threads : {1, 4}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(1000, threads, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_for propagates exceptions") {
  CHECK_THROWS_AS(
      parallel_for(100, 4,
                   [&](std::size_t i) {
                     if (i == 57) raise(ErrorKind::Io, "boom");
                   }),
      Error);
}

TEST_CASE("rng streams are deterministic and derivation separates them") {
  Rng a = Rng::derive(42, {1, 2});
  Rng b = Rng::derive(42, {1, 2});
  Rng c = Rng::derive(42, {1, 3});
  bool all_equal = true;
  bool any_diff_from_c = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    if (va != b.next_u64()) all_equal = false;
    if (va != c.next_u64()) any_diff_from_c = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_from_c);
}

TEST_CASE("rng below stays in range and covers small supports") {
  Rng rng(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 300; ++i) {
    const auto v = rng.below(5);
    CHECK(v < 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("rng sample_without_replacement yields distinct in-range values") {
  Rng rng(11);
  const auto picks = rng.sample_without_replacement(10, 10);
  std::set<std::size_t> s(picks.begin(), picks.end());
  CHECK(s.size() == 10);
  CHECK(*s.begin() == 0);
  CHECK(*s.rbegin() == 9);

  const auto partial = rng.sample_without_replacement(100, 7);
  CHECK(partial.size() == 7);
  std::set<std::size_t> sp(partial.begin(), partial.end());
  CHECK(sp.size() == 7);
  for (const auto v : sp) CHECK(v < 100);
}

TEST_CASE("rng shuffle permutes deterministically under seed") {
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  const std::vector<int> original = v1;
  Rng r1(3), r2(3);
  r1.shuffle(v1);
  r2.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == original);
}

TEST_CASE("rng gaussian has sane first moments") {
  Rng rng(1234);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_gaussian();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("binary io round-trips values little-endian") {
  std::ostringstream out(std::ios::binary);
  {
    BinWriter w(out);
    w.u16(0x1234);
    w.u32(0xdeadbeef);
    w.u64(0x0123456789abcdefULL);
    w.f32(1.5f);
    w.f64(-0.3);
    w.str_u32("hello");
  }
  const std::string bytes = out.str();
  CHECK(static_cast<unsigned char>(bytes[0]) == 0x34);  // low byte first
  CHECK(static_cast<unsigned char>(bytes[1]) == 0x12);

  std::istringstream in(bytes, std::ios::binary);
  BinReader r(in);
  CHECK(r.u16() == 0x1234);
  CHECK(r.u32() == 0xdeadbeef);
  CHECK(r.u64() == 0x0123456789abcdefULL);
  CHECK(r.f32() == 1.5f);
  CHECK(r.f64() == -0.3);
  CHECK(r.str_u32() == "hello");
  CHECK(r.at_eof());
}

TEST_CASE("binary reader raises on short reads") {
  std::istringstream in(std::string("\x01\x02", 2), std::ios::binary);
  BinReader r(in);
  CHECK_THROWS_AS(r.u32(), Error);
}
