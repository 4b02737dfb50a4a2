#include <gtest/gtest.h>

#include "cbneed/calculus.hpp"
#include "cbneed/harness.hpp"

namespace {

using namespace cbneed;
using namespace cbneed::terms;

const Term I = identity();

EvalContext ctx(std::vector<ContextLayer> layers) { return EvalContext{std::move(layers)}; }

TEST(Delta, Examples) {
  EXPECT_EQ(delta(EvalContext::hole()), 0u);
  EXPECT_EQ(delta(ctx({BindBody{I}})), 1u);
  auto body = std::make_shared<const EvalContext>(ctx({BindBody{I}, BindBody{I}}));
  EXPECT_EQ(delta(ctx({BindArg{body}})), 0u);
  EXPECT_EQ(delta(ctx({BindBody{I}, AppL{I}, BindBody{I}})), 2u);
  EXPECT_EQ(delta(AnswerContext{{I, I, I}}), 3u);
}

TEST(Plug, Examples) {
  EXPECT_EQ(plug(EvalContext::hole(), v(4)), v(4));
  EXPECT_EQ(plug(ctx({AppL{I}}), I), app(I, I));
  EXPECT_EQ(plug(ctx({BindBody{I}}), v(0)), app(I, I));
  auto body = std::make_shared<const EvalContext>(ctx({AppL{v(7)}}));
  // (λ.E'[0]) [] with E' = [] 7
  EXPECT_EQ(plug(ctx({BindArg{body}}), I), app(lam(app(v(0), v(7))), I));
  EXPECT_EQ(plug(AnswerContext{{v(1), v(2)}}, I), app(lam(app(lam(I), v(2))), v(1)));
}

TEST(Decompose, Examples) {
  EXPECT_EQ(decompose(app(I, I)), Decomposition(Decomposed{EvalContext::hole(), Deref{{}, I}}));
  EXPECT_EQ(decompose(I), Decomposition(IsAnswer{AnswerContext::hole(), I}));
  const Term k_i = app(lam(I), I);
  EXPECT_EQ(decompose(app(k_i, I)),
            Decomposition(Decomposed{EvalContext::hole(), AssocL{AnswerContext::hole(), I, I, I}}));
  EXPECT_EQ(decompose(app(I, k_i)),
            Decomposition(Decomposed{EvalContext::hole(), AssocR{{}, AnswerContext::hole(), I, I}}));
  EXPECT_TRUE(std::holds_alternative<IsAnswer>(decompose(k_i)));
}

TEST(Decompose, PlugRestoresTheTerm) {
  harness::TermGenerator g(21);
  for (int i = 0; i < 5000; ++i) {
    const Term t = g.closed(14);
    ASSERT_EQ(plug(decompose(t)), t) << print(t);
  }
}

TEST(Decompose, RejectsOpenTerms) {
  EXPECT_THROW(decompose(app(I, v(0))), std::logic_error);
  EXPECT_THROW(eval_need(v(0), 10), OpenTerm);
}

TEST(Contract, Examples) {
  EXPECT_EQ(contract(Deref{{}, I}), app(lam(I), I));
  EXPECT_EQ(contract(AssocL{AnswerContext::hole(), I, I, I}), app(lam(app(I, I)), I));
  EXPECT_EQ(contract(AssocR{{}, AnswerContext::hole(), I, I}), app(lam(app(I, I)), I));
}

TEST(StepNeed, Examples) {
  EXPECT_EQ(step_need(app(I, I)), app(lam(I), I));
  EXPECT_EQ(step_need(app(lam(I), I)), std::nullopt);
  EXPECT_EQ(step_need(app(app(I, I), I)), app(app(lam(I), I), I));
  EXPECT_TRUE(is_answer(app(lam(I), I)));
  EXPECT_FALSE(is_answer(app(I, I)));
}

TEST(EvalNeed, Examples) {
  auto r = eval_need(app(I, I), 100);
  ASSERT_TRUE(r.answer);
  EXPECT_EQ(*r.answer, app(lam(I), I));
  EXPECT_EQ(r.reductions, 1u);
  r = eval_need(I, 0);
  ASSERT_TRUE(r.answer);
  EXPECT_EQ(*r.answer, I);
  r = eval_need(omega(), 1000);
  EXPECT_TRUE(r.budget_exceeded());
  EXPECT_EQ(r.reductions, 1000u);
}

TEST(EvalNeed, BudgetIsExact) {
  // (λ.0)(λ.0) needs one reduction.
  EXPECT_TRUE(eval_need(app(I, I), 0).budget_exceeded());
  EXPECT_FALSE(eval_need(app(I, I), 1).budget_exceeded());
}

TEST(EvalNeed, RefocusingMatchesStepwise) {
  for (const auto& t : harness::enumerate_closed_upto(8)) {
    const auto a = eval_need(t, 300);
    const auto b = eval_need_stepwise(t, 300);
    ASSERT_EQ(a.answer, b.answer) << print(t);
    ASSERT_EQ(a.reductions, b.reductions) << print(t);
  }
  harness::TermGenerator g(22);
  for (int i = 0; i < 3000; ++i) {
    const Term t = g.closed(16);
    const auto a = eval_need(t, 500);
    const auto b = eval_need_stepwise(t, 500);
    ASSERT_EQ(a.answer, b.answer) << print(t);
    ASSERT_EQ(a.reductions, b.reductions) << print(t);
  }
}

TEST(EvalNeed, ChurchTwoPlusTwo) {
  const Term sum = app(harness::church_plus(), harness::church(2), harness::church(2));
  const auto r = eval_need(sum, 10000);
  ASSERT_TRUE(r.answer);
  const auto nf = harness::beta_normal_form(*r.answer, 10000);
  ASSERT_TRUE(nf);
  EXPECT_EQ(*nf, harness::church(4));
  // Applied to I twice, the numeral's answer is the identity under bindings.
  const auto applied = eval_need(app(sum, I, I), 10000);
  ASSERT_TRUE(applied.answer);
  EXPECT_EQ(harness::normalize(*applied.answer), I);
}

TEST(EvalNeed, ArgumentsAreSharedNotCopied) {
  // (λ.0 0)((λ.0)(λ.0)): the argument is reduced once, then reused.
  const Term t = app(lam(app(v(0), v(0))), app(I, I));
  const auto r = eval_need(t, 100);
  ASSERT_TRUE(r.answer);
  std::uint64_t steps = 0;
  Term u = t;
  while (auto next = step_need(u)) {
    u = *next;
    ++steps;
  }
  EXPECT_EQ(steps, r.reductions);
  EXPECT_LT(r.reductions, 10u);
}

}  // namespace
