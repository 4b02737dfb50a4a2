#include <gtest/gtest.h>

#include <map>

#include "cbneed/ckplus.hpp"
#include "cbneed/harness.hpp"

namespace {

using namespace cbneed;
using namespace cbneed::terms;

const Term I = identity();

CompleteFrame bind(Term arg, RenamingEnv env = {}, PartialFrame inner = PartialFrame::mt()) {
  return CompleteFrame{std::move(arg), std::move(env), std::move(inner), 0};
}

MachineState eval_state(Term c, RenamingEnv r, PartialFrame top, std::vector<CompleteFrame> frames = {}) {
  return EvalState{std::move(c), std::move(r), ContinuationStack::of(std::move(top), std::move(frames))};
}

TEST(Inject, Examples) {
  EXPECT_EQ(inject(app(I, I)), eval_state(app(I, I), {}, PartialFrame::mt()));
  EXPECT_EQ(inject(I), eval_state(I, {}, PartialFrame::mt()));
  EXPECT_THROW(inject(v(0)), OpenTerm);
}

TEST(Transitions, IdentityAppliedToIdentity) {
  MachineState s = inject(app(I, I));
  const std::vector<std::pair<Rule, MachineState>> expected = {
      {Rule::shift_arg, eval_state(I, {}, PartialFrame::arg(I, {}, PartialFrame::mt()))},
      {Rule::descend_lambda, eval_state(v(0), {0}, PartialFrame::mt(), {bind(I)})},
      {Rule::lookup_arg,
       eval_state(I, {}, PartialFrame::op(ContinuationStack::of(PartialFrame::mt()), PartialFrame::mt()))},
      {Rule::resume, eval_state(I, {}, PartialFrame::mt(), {bind(I)})},
      {Rule::ans_search1, SearchState{I, {}, {bind(I)}, {}}},
      {Rule::ans_search2, SearchState{I, {}, {}, {bind(I)}}},
  };
  for (const auto& [rule, state] : expected) {
    ASSERT_FALSE(is_final(s));
    auto info = advance(s);
    ASSERT_TRUE(info);
    EXPECT_EQ(info->rule, rule) << rule_name(rule);
    EXPECT_EQ(s, state) << rule_name(rule);
  }
  EXPECT_TRUE(is_final(s));
  EXPECT_FALSE(advance(s));
  EXPECT_EQ(unload(s), app(lam(I), I));
}

TEST(Unload, Examples) {
  EXPECT_EQ(unload(inject(omega())), omega());
  EXPECT_EQ(unload(eval_state(v(0), {0}, PartialFrame::mt(), {bind(I)})), app(I, I));
  EXPECT_EQ(unload(eval_state(I, {}, PartialFrame::op(ContinuationStack::of(PartialFrame::mt()),
                                                       PartialFrame::mt()))),
            app(I, I));
  EXPECT_EQ(unload(SearchState{I, {}, {}, {bind(I)}}), app(lam(I), I));
}

TEST(StackMetrics, Examples) {
  auto m = stack_metrics(inject(I));
  EXPECT_EQ(m.depth, 1u);
  EXPECT_EQ(m.bind_count, 0u);
  m = stack_metrics(eval_state(v(0), {0}, PartialFrame::mt(), {bind(I)}));
  EXPECT_EQ(m.depth, 2u);
  EXPECT_EQ(m.bind_count, 1u);
  m = stack_metrics(SearchState{I, {}, {}, {bind(I)}});
  EXPECT_EQ(m.depth, 0u);
  EXPECT_EQ(m.answer_frames, 1u);
}

TEST(EvalCkplus, Examples) {
  auto r = eval_ckplus(app(I, I), 100);
  ASSERT_TRUE(r.answer);
  EXPECT_EQ(*r.answer, app(lam(I), I));
  EXPECT_EQ(r.steps, 6u);
  r = eval_ckplus(I, 100);
  ASSERT_TRUE(r.answer);
  EXPECT_EQ(*r.answer, I);
  EXPECT_TRUE(eval_ckplus(omega(), MachineBudget::reductions(1000)).budget_exceeded());
  EXPECT_EQ(eval_ckplus(omega(), MachineBudget::reductions(1000)).reductions, 1000u);
  EXPECT_TRUE(eval_ckplus(omega(), 1000).budget_exceeded());
}

TEST(EvalCkplus, AgreesWithStandardReduction) {
  for (const auto& t : harness::enumerate_closed_upto(8)) {
    const auto need = eval_need(t, 200);
    const auto machine = eval_ckplus(t, MachineBudget::reductions(200));
    ASSERT_EQ(need.answer, machine.answer) << print(t);
    ASSERT_EQ(need.reductions, machine.reductions) << print(t);
  }
}

TEST(Simulation, EveryStepOnRandomTerms) {
  harness::TermGenerator g(31);
  harness::AuditOptions opts;
  opts.simulation = opts.well_formed = opts.laziness = true;
  for (int i = 0; i < 2000; ++i) {
    const Term t = g.closed(14);
    const auto report = harness::audit_run(t, MachineBudget::reductions(300), opts);
    ASSERT_EQ(report.violations(), 0u) << print(t) << "\n" << report.messages.front();
  }
}

TEST(AssocR, FusedFormEqualsSplitPlusResume) {
  harness::TermGenerator g(32);
  MachineOptions fused;
  fused.fused_assoc_r = true;
  int seen = 0;
  for (int i = 0; i < 3000; ++i) {
    MachineState s = inject(g.closed(14));
    for (int n = 0; n < 400 && !is_final(s); ++n) {
      MachineState other = s;
      auto a = advance(s);
      if (a->rule != Rule::assoc_r) continue;
      auto b = advance(other, fused);
      ASSERT_EQ(b->rule, Rule::assoc_r);
      auto c = advance(s);
      ASSERT_EQ(c->rule, Rule::resume);
      ASSERT_EQ(unload(s), unload(other));
      ++seen;
    }
  }
  EXPECT_GT(seen, 100);
}

// Adding to every offset of the demanding stack (instead of only those that
// reach past the demanded binding) moves references that stay put.
TEST(AssocR, BumpingEveryOffsetBreaksSimulation) {
  const Term t = app(lam(app(v(0), v(0))), app(I, I));
  MachineState s = inject(t);
  for (;;) {
    ASSERT_FALSE(is_final(s));
    auto next = step(s);
    if (next->rule == Rule::assoc_r) break;
    s = next->after;
  }
  auto x = std::get<SearchState>(s);
  CompleteFrame frame = x.remaining.back();
  x.remaining.pop_back();
  ASSERT_TRUE(frame.inner.is_op());
  const Index lift = x.answers.size() + 1;
  std::vector<CompleteFrame> below = x.remaining;
  below.push_back(CompleteFrame{frame.arg, frame.env, frame.inner.rest(), frame.id});
  below.insert(below.end(), x.answers.rbegin(), x.answers.rend());
  const MachineState literal = EvalState{
      x.value, x.env,
      ContinuationStack{PartialFrame::op(bump(frame.inner.saved(), lift), PartialFrame::mt()), below}};
  const Term before = unload(s);
  EXPECT_EQ(harness::check_simulation(before, unload(literal)), harness::SimulationCheck::violation);
  EXPECT_EQ(harness::check_simulation(before, unload(step(s)->after)),
            harness::SimulationCheck::reduction);
}

TEST(Mutation, SwappedAssocLIsCaught) {
  MachineOptions broken;
  broken.mutation = Mutation::swap_assoc_l;
  harness::TermGenerator g(33);
  int caught = 0;
  for (int i = 0; i < 500; ++i) {
    const Term t = g.closed(12);
    if (eval_need(t, 500).answer != eval_ckplus(t, MachineBudget::reductions(500), broken).answer) {
      ++caught;
    }
  }
  EXPECT_GT(caught, 0);
}

TEST(WellFormed, RejectsBrokenStates) {
  EXPECT_NO_THROW(check_well_formed(eval_state(v(0), {0}, PartialFrame::mt(), {bind(I)})));
  EXPECT_THROW(check_well_formed(eval_state(v(0), {1}, PartialFrame::mt(), {bind(I)})), MalformedState);
  EXPECT_THROW(check_well_formed(eval_state(v(0), {}, PartialFrame::mt(), {bind(I)})), MalformedState);
  EXPECT_THROW(check_well_formed(eval_state(I, {0, 0}, PartialFrame::mt(), {bind(I)})), MalformedState);
  EXPECT_NO_THROW(check_well_formed(eval_state(I, {0, 0}, PartialFrame::mt(), {bind(I)}),
                                    EnvLength::unchecked));
  EXPECT_THROW(check_well_formed(SearchState{app(I, I), {}, {}, {}}), MalformedState);
  EXPECT_THROW(check_well_formed(SearchState{I, {}, {}, {bind(I, {}, PartialFrame::arg(I, {}, PartialFrame::mt()))}}),
               MalformedState);
  EXPECT_THROW(check_well_formed(eval_state(I, {}, PartialFrame::arg(v(0), {0}, PartialFrame::mt()))),
               MalformedState);
}

TEST(WellFormed, TrackerAgreesWithFullCheck) {
  harness::TermGenerator g(34);
  for (int i = 0; i < 1500; ++i) {
    const Term t = g.closed(14);
    MachineState s = inject(t);
    WellFormedTracker tracker;
    tracker.reset(s);
    for (int n = 0; n < 300 && !is_final(s); ++n) {
      auto info = advance(s);
      ASSERT_NO_THROW(check_well_formed(s)) << print(t);
      ASSERT_NO_THROW(tracker.after(*info, s)) << print(t);
    }
  }
}

TEST(Laziness, EachBindingIsForcedOnce) {
  // (λ.0 0 0)((λ.0)(λ.0)): three demands of one binding.
  const Term t = app(lam(app(app(v(0), v(0)), v(0))), app(I, I));
  std::map<BindingId, int> forced;
  int lookups = 0;
  auto r = eval_ckplus(t, MachineBudget::steps(1000), [&](const StepInfo& info, const MachineState&) {
    if (info.rule != Rule::lookup_arg) return;
    ++lookups;
    if (!info.argument_is_value) ++forced[info.binding];
  });
  ASSERT_TRUE(r.answer);
  EXPECT_GE(lookups, 5);
  for (const auto& [binding, n] : forced) EXPECT_EQ(n, 1) << binding;
  // The shared argument is reduced once: same count as the calculus.
  EXPECT_EQ(r.reductions, eval_need(t, 1000).reductions);
}

TEST(Rules, Names) {
  for (auto r : {Rule::shift_arg, Rule::descend_lambda, Rule::lookup_arg, Rule::resume,
                 Rule::ans_search1, Rule::ans_search2, Rule::assoc_l, Rule::assoc_r}) {
    EXPECT_EQ(rule_from_name(rule_name(r)), r);
  }
  EXPECT_EQ(rule_from_name("descend-lambda"), Rule::descend_lambda);
  EXPECT_EQ(rule_from_name("nope"), std::nullopt);
}

}  // namespace
