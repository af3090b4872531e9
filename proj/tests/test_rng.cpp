#include <doctest.h>

#include <stdexcept>

#include "padforge/rng.hpp"

using namespace padforge;

TEST_CASE("same seed emits identical draws") {
  Rng a(42), b(42);
  for (int i = 0; i < 10000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) {
    if (a.next_u64() == b.next_u64()) ++equal;
  }
  CHECK(equal < 5);
}

TEST_CASE("unit draws stay in [0,1)") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("below respects the bound and rejects zero") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.below(7) < 7);
  }
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
}

TEST_CASE("split streams are deterministic and distinct") {
  const Rng base(99);
  Rng a = base.split(0);
  Rng b = base.split(0);
  Rng c = base.split(1);
  CHECK(a.next_u64() == b.next_u64());
  Rng a2 = base.split(0);
  int equal = 0;
  for (int i = 0; i < 100; ++i) {
    if (a2.next_u64() == c.next_u64()) ++equal;
  }
  CHECK(equal < 5);
}

TEST_CASE("shuffle is seed-deterministic") {
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  Rng r1(5), r2(5);
  shuffle(v1, r1);
  shuffle(v2, r2);
  CHECK(v1 == v2);
}
