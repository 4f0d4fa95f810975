#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "eef/common/codec.hpp"
#include "eef/common/random.hpp"

using namespace eef;

TEST_CASE("fnv1a64 matches the published offset basis and test vector") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("derive_seed is deterministic and order sensitive") {
  CHECK(derive_seed({1, 2, 3}) == derive_seed({1, 2, 3}));
  CHECK(derive_seed({1, 2, 3}) != derive_seed({3, 2, 1}));
  CHECK(derive_seed({1, 2}) != derive_seed({1, 2, 0}));
}

TEST_CASE("Rng draws stay in range and shuffle permutes") {
  Rng rng(42);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    auto v = rng.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  CHECK(seen.size() == 7);

  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w.begin(), w.end());
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);

  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("field codec roundtrips and rejects malformed input") {
  FieldWriter w;
  w.put("hello").put("").put("a:b:c").put_int(-17).put_uint(18446744073709551615ULL);
  FieldReader r(w.str());
  CHECK(r.next() == "hello");
  CHECK(r.next() == "");
  CHECK(r.next() == "a:b:c");
  CHECK(r.next_int() == -17);
  CHECK(r.next_uint() == 18446744073709551615ULL);
  CHECK(r.done());
  CHECK_NOTHROW(r.expect_done());

  CHECK_THROWS_AS(FieldReader("5:abc").next(), CodecError);
  CHECK_THROWS_AS(FieldReader("x:abc").next(), CodecError);
  FieldReader extra("1:a1:b");
  extra.next();
  CHECK_THROWS_AS(extra.expect_done(), CodecError);
}
