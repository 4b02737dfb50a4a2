#include <gtest/gtest.h>

#include "cbneed/harness.hpp"
#include "cbneed/renaming.hpp"

namespace {

using namespace cbneed;
using namespace cbneed::terms;

TEST(Lookup, Examples) {
  EXPECT_EQ(lookup(RenamingEnv{2}, 0), 2);
  EXPECT_EQ(lookup(RenamingEnv{0, 5}, 1), 5);
  EXPECT_THROW(lookup(RenamingEnv{}, 0), MalformedState);
  EXPECT_EQ(effective_index(RenamingEnv{0, 5}, 1), 6u);
  EXPECT_THROW(effective_index(RenamingEnv{-2}, 0), MalformedState);
}

TEST(Apply, Examples) {
  const Term t = app(lam(v(3)), v(1));
  EXPECT_EQ(apply(RenamingEnv{}, t), t);
  EXPECT_EQ(apply(RenamingEnv{2}, v(0)), v(2));
  EXPECT_EQ(apply(RenamingEnv{3}, lam(v(1))), lam(v(4)));
  EXPECT_EQ(apply(RenamingEnv{1, -1}, app(v(0), v(1))), app(v(1), v(0)));
  EXPECT_EQ(apply(RenamingEnv{5}, identity()), identity());
}

TEST(AddAll, Examples) {
  EXPECT_EQ(add_all(RenamingEnv{}, 5), RenamingEnv{});
  EXPECT_EQ(add_all(RenamingEnv({1, 2}), 3), RenamingEnv({4, 5}));
  EXPECT_EQ(add_all(RenamingEnv{0}, 0), RenamingEnv{0});
}

TEST(Adjust, Examples) {
  EXPECT_EQ(adjust(v(0), RenamingEnv{0}, -1, 1), RenamingEnv{0});
  EXPECT_EQ(adjust(v(0), RenamingEnv{3}, -1, 1), RenamingEnv{2});
  const RenamingEnv r{1, 4, 0};
  EXPECT_EQ(adjust(app(v(0), v(1)), r, 0, 2), r);
  EXPECT_EQ(adjust(app(v(0), v(1)), r, 2, 2), RenamingEnv({1, 6, 0}));
  EXPECT_EQ(adjust(v(0), r, 1, -1), add_all(r, 1));
}

TEST(Adjust, MatchesShiftOfTheAppliedTerm) {
  // Raising every reach above ℓ by x is shift(apply(R, M), x, ℓ + 1).
  harness::TermGenerator g(11);
  for (int i = 0; i < 5000; ++i) {
    const std::size_t len = 1 + g.below(5);
    const Term t = g.open(1 + g.below(15), len);
    const RenamingEnv r = harness::random_env(g, len, 4);
    const Offset l = static_cast<Offset>(g.below(8));
    const Index x = g.below(4);
    ASSERT_EQ(apply(adjust(t, r, static_cast<Offset>(x), l), t),
              shift(apply(r, t), x, static_cast<Index>(l) + 1));
  }
}

TEST(Concat, Lengths) {
  EXPECT_EQ(concat(RenamingEnv{1}, RenamingEnv({2, 3})), RenamingEnv({1, 2, 3}));
  EXPECT_EQ(concat(RenamingEnv{}, RenamingEnv{}).size(), 0u);
  EXPECT_EQ(RenamingEnv{4}.push_front(), RenamingEnv({0, 4}));
}

// shift(apply(R₁ ++ R₂, M), x, |R₁|) = apply(R₁ ++ (R₂ ↑ x), M) whenever R₁
// keeps its variables local (n + R₁(n) < |R₁|) and R₂ sends its variables at
// or past |R₁|.
TEST(Commutation, RandomInstances) {
  harness::TermGenerator g(12);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t m = g.below(5);
    const std::size_t k = 1 + g.below(4);
    std::vector<Offset> r1(m), r2(k);
    for (std::size_t n = 0; n < m; ++n) r1[n] = static_cast<Offset>(g.below(m - n));
    for (std::size_t n = 0; n < k; ++n) r2[n] = static_cast<Offset>(g.below(5));
    const Term t = g.open(1 + g.below(20), m + k);
    const Index x = g.below(6);
    const RenamingEnv a(r1), b(r2);
    ASSERT_EQ(shift(apply(concat(a, b), t), x, m), apply(concat(a, add_all(b, x)), t))
        << print(t);
  }
}

}  // namespace
