#include "osal/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace osal;

TEST_CASE("derived seeds differ across streams and indices") {
  std::set<std::uint64_t> seen;
  for (auto s : {SeedStream::benchmark, SeedStream::member_init, SeedStream::shuffle, SeedStream::scorer,
                 SeedStream::tie_break, SeedStream::eval_member})
    for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(7, s, i));
  CHECK(seen.size() == 300);
  CHECK(derive_seed(7, SeedStream::scorer, 3) == derive_seed(7, SeedStream::scorer, 3));
  CHECK(derive_seed(7, SeedStream::scorer, 3) != derive_seed(8, SeedStream::scorer, 3));
}

TEST_CASE("uniform draws stay in [0, 1) and replay per seed") {
  Rng a(11), b(11);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
}

TEST_CASE("normal draws have roughly unit moments") {
  Rng rng(3);
  const int n = 20000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("permutation is a bijection") {
  Rng rng(5);
  auto p = rng.permutation(100);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);
  for (int i = 0; i < 100; ++i) CHECK(rng.below(7) < 7);
}
