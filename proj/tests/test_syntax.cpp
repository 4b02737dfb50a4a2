#include <gtest/gtest.h>

#include "cbneed/harness.hpp"
#include "cbneed/syntax.hpp"
#include "cbneed/term.hpp"

namespace {

using namespace cbneed;
using namespace cbneed::terms;

TEST(Parse, Debruijn) {
  EXPECT_EQ(parse_debruijn("\\. 0 0"), lam(app(v(0), v(0))));
  EXPECT_EQ(parse_debruijn("(\\. 0) (\\. 0)"), app(identity(), identity()));
  EXPECT_EQ(parse_debruijn("(\\.0)(\\.0)"), app(identity(), identity()));
  EXPECT_EQ(parse_debruijn("λ. λ. 1"), lam(lam(v(1))));
  EXPECT_EQ(parse_debruijn("0 1 2"), app(app(v(0), v(1)), v(2)));
  EXPECT_EQ(parse_debruijn("\\. 0 -- a comment\n"), identity());
}

TEST(Parse, Named) {
  const NamedTerm x = parse_named("\\x. x");
  EXPECT_EQ(x, NamedTerm::lam("x", NamedTerm::var("x")));
  EXPECT_EQ(to_debruijn(parse_named("\\x.\\y.x")), lam(lam(v(1))));
  EXPECT_EQ(to_debruijn(parse_named("\\x.x")), identity());
  EXPECT_EQ(to_debruijn(parse_named("\\x. \\x. x")), lam(lam(v(0))));
}

TEST(Parse, Errors) {
  EXPECT_THROW(to_debruijn(parse_named("\\x.y")), UnboundVariable);
  try {
    to_debruijn(parse_named("\\x.y"));
  } catch (const UnboundVariable& e) {
    EXPECT_EQ(e.name(), "y");
  }
  EXPECT_THROW(parse_debruijn("(\\. 0"), SyntaxError);
  EXPECT_THROW(parse_debruijn(""), SyntaxError);
  EXPECT_THROW(parse_debruijn("\\. x"), SyntaxError);
  EXPECT_THROW(parse_named("\\. 0"), SyntaxError);
  EXPECT_THROW(parse_debruijn("0 )"), SyntaxError);
}

TEST(Print, Examples) {
  EXPECT_EQ(print(identity()), "\\. 0");
  EXPECT_EQ(print(app(identity(), identity())), "(\\. 0) (\\. 0)");
  EXPECT_EQ(print(lam(lam(v(1)))), "\\. \\. 1");
  EXPECT_EQ(print(app(v(0), app(v(1), v(2)))), "0 (1 2)");
  EXPECT_EQ(print(app(app(v(0), v(1)), v(2))), "0 1 2");
}

TEST(Print, RoundTripRandom) {
  harness::TermGenerator g(7);
  for (int i = 0; i < 10000; ++i) {
    const Term t = g.open(1 + i % 30, i % 4);
    ASSERT_EQ(parse_debruijn(print(t)), t) << print(t);
    ASSERT_EQ(parse(print(t, Syntax::debruijn), Syntax::debruijn), t);
  }
}

TEST(Print, NamedRoundTripIsAlphaEquivalent) {
  harness::TermGenerator g(8);
  for (int i = 0; i < 10000; ++i) {
    const Term t = g.closed(2 + i % 25);
    const std::string named = print(t, Syntax::named);
    ASSERT_EQ(to_debruijn(parse_named(named)), t) << named;
  }
  // Different binder names, same term.
  EXPECT_EQ(to_debruijn(parse_named("\\a.\\b. a b")), to_debruijn(parse_named("\\p.\\q. p q")));
}

TEST(Shift, Examples) {
  EXPECT_EQ(shift(v(0), 2, 0), v(2));
  EXPECT_EQ(shift(v(0), 2, 1), v(0));
  EXPECT_EQ(shift(lam(v(1)), 1, 0), lam(v(2)));
  EXPECT_EQ(unshift(lam(v(2))), lam(v(1)));
  EXPECT_EQ(unshift(app(v(0), v(3)), 1), app(v(0), v(2)));
}

TEST(Shift, Algebra) {
  harness::TermGenerator g(9);
  for (int i = 0; i < 10000; ++i) {
    const Term t = g.open(1 + i % 20, 1 + i % 3);
    const Index m = g.below(4);
    const Index x = g.below(5);
    const Index y = g.below(5);
    ASSERT_EQ(shift(t, 0, m), t);
    ASSERT_EQ(shift(shift(t, x, m), y, m), shift(t, x + y, m));
    const Term c = g.closed(2 + i % 20);
    ASSERT_EQ(shift(c, x, m), c);
  }
}

TEST(FreeIndices, Examples) {
  EXPECT_TRUE(free_indices(identity()).empty());
  EXPECT_EQ(free_indices(v(3)), (std::set<Index>{3}));
  EXPECT_EQ(free_indices(lam(v(2))), (std::set<Index>{1}));
  EXPECT_EQ(free_indices(app(lam(app(v(0), v(4))), v(1))), (std::set<Index>{1, 3}));
  EXPECT_TRUE(occurs_free(lam(v(2)), 1));
  EXPECT_FALSE(occurs_free(lam(v(0)), 0));
}

TEST(Term, SizeAndEquality) {
  EXPECT_EQ(app(identity(), identity()).size(), 5u);
  EXPECT_EQ(omega().size(), 9u);
  EXPECT_NE(lam(v(0)), lam(v(1)));
  EXPECT_EQ(lam(v(1)).free_bound(), 1u);
  EXPECT_TRUE(identity().is_closed());
}

TEST(Term, DeepTermsAreReleasedWithoutRecursion) {
  Term t = v(0);
  for (int i = 0; i < 1000000; ++i) t = lam(std::move(t));
  Term u = t;
  EXPECT_EQ(t, u);
  t = v(0);
  u = v(0);
  SUCCEED();
}

}  // namespace
