#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <numeric>

#include "voxsel/common.hpp"

using namespace voxsel;

TEST_CASE("sha256 matches the standard test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("rng helpers are deterministic and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    CHECK(u == uniform01(b));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng r(1);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const int k = uniform_int(r, 3, 9);
    REQUIRE(k >= 3);
    REQUIRE(k <= 9);
    ++seen[k - 3];
  }
  for (int c : seen) CHECK(c > 800);
  double sum = 0, sq = 0;
  for (int i = 0; i < 20000; ++i) {
    const double z = normal(r);
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 20000) < 0.03);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  Rng r(3);
  shuffle(v, r);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[i] == i);
  CHECK_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST_CASE("parallel_for covers every index once for any worker count") {
  for (int workers : {1, 2, 5}) {
    set_worker_count(workers);
    std::vector<std::atomic<int>> hits(1003);
    parallel_for(hits.size(), 17, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) hits[i]++;
    });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  set_worker_count(1);
}

TEST_CASE("raster indexing is interleaved row-major") {
  Raster<int> r(3, 2, 2);
  r.at(2, 1, 1) = 7;
  CHECK(r.data[(1 * 3 + 2) * 2 + 1] == 7);
  CHECK(r.same_shape(Raster<int>(3, 2, 2)));
  CHECK_FALSE(r.same_shape(Raster<int>(2, 3, 2)));
}

TEST_CASE("fail throws an Error carrying its code") {
  try {
    fail(ErrorCode::Overlap, "x");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Overlap);
    CHECK(std::string(e.what()) == "overlap: x");
  }
  CHECK(std::string(to_string(ErrorCode::NotFound)) == "not-found");
}
