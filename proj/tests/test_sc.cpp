#include <gtest/gtest.h>

#include "cbneed/harness.hpp"
#include "cbneed/sc.hpp"

namespace {

using namespace cbneed;
using namespace cbneed::terms;

const Term I = identity();
const PartialFrame mt = PartialFrame::mt();

CompleteFrame bind(Term arg, RenamingEnv env = {}, PartialFrame inner = PartialFrame::mt()) {
  return CompleteFrame{std::move(arg), std::move(env), std::move(inner), 0};
}

// Eval states met while running `t`, including compacted ones when `policy`
// fires.
std::vector<EvalState> eval_states(const Term& t, std::uint64_t reductions,
                                   CompactionPolicy policy = CompactionPolicy::off()) {
  std::vector<EvalState> out;
  auto keep = [&out](const MachineState& s) {
    if (const auto* e = std::get_if<EvalState>(&s)) out.push_back(*e);
  };
  keep(inject(t));
  eval_ckplus_compacting(
      t, MachineBudget::reductions(reductions), policy,
      [&](const StepInfo&, const MachineState& s) { keep(s); },
      [&](const MachineState&, const MachineState& after) { keep(after); });
  return out;
}

std::vector<EvalState> sample_states() {
  std::vector<EvalState> out;
  for (const auto& t : harness::enumerate_closed_upto(7)) {
    auto s = eval_states(t, 100);
    out.insert(out.end(), s.begin(), s.end());
  }
  harness::TermGenerator g(41);
  for (int i = 0; i < 600; ++i) {
    auto s = eval_states(g.closed(14), 150, i % 2 == 0 ? CompactionPolicy::every(3)
                                                       : CompactionPolicy::depth(2));
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

const std::vector<EvalState>& states() {
  static const auto all = sample_states();
  return all;
}

FreeSet above(const std::set<Index>& f, Index m) {
  FreeSet out;
  for (Index d : f) {
    if (d >= m) out.insert(d - m);
  }
  return out;
}

TEST(FreeVariables, Examples) {
  EXPECT_EQ(fv_term(v(0), {0}, 0), FreeSet{0});
  EXPECT_EQ(fv_term(I, {}, 0), FreeSet{});
  EXPECT_EQ(fv_term(v(0), {2}, 1), FreeSet{1});
  EXPECT_EQ(fv_frame(mt, 0), FreeSet{});
  EXPECT_EQ(fv_frame(PartialFrame::arg(v(0), {1}, mt), 0), FreeSet{1});
  EXPECT_EQ(fv_frame(bind(I), 0), FreeSet{});
}

TEST(FreeVariables, MatchReconstruction) {
  // fv of a frame is what its φ-image leaves free around a closed hole.
  std::size_t frames = 0;
  for (const auto& s : states()) {
    const Index m = frames % 3;
    ASSERT_EQ(fv_frame(s.stack.top, m), above(free_indices(plug(s.stack.top, I)), m));
    for (const auto& f : s.stack.below) {
      ASSERT_EQ(fv_frame(f, m), above(free_indices(plug(f, I)), m));
      ++frames;
    }
    ASSERT_EQ(fv_stack(s.stack, 0), free_indices(plug(s.stack, I)));
    ASSERT_EQ(fv_term(s.control, s.env, 0), free_indices(apply(s.env, s.control)));
  }
  EXPECT_GT(frames, 1000u);
}

TEST(Dec, Examples) {
  EXPECT_EQ(dec({0}), FreeSet{});
  EXPECT_EQ(dec({1, 3}), (FreeSet{0, 2}));
  EXPECT_EQ(dec({}), FreeSet{});
}

TEST(Merge, Examples) {
  const PartialFrame k = PartialFrame::arg(v(5), {}, mt);
  EXPECT_EQ(merge(ContinuationStack::of(mt), k), ContinuationStack::of(k));
  EXPECT_EQ(merge(ContinuationStack::of(mt, {bind(I)}), k), ContinuationStack::of(mt, {bind(I, {}, k)}));
  EXPECT_EQ(merge(ContinuationStack::of(PartialFrame::arg(I, {}, mt)), k),
            ContinuationStack::of(PartialFrame::arg(I, {}, k)));
  EXPECT_EQ(merge(mt, k), k);
}

TEST(SC, WorkedExample) {
  const EvalState s{v(0), {0}, ContinuationStack::of(mt, {bind(I), bind(lam(I))})};
  SCState sc = sc_inject(s);
  EXPECT_EQ(sc.free, FreeSet{0});

  EXPECT_EQ(sc_advance(sc), SCRule::shift_partial_frame);
  EXPECT_EQ(sc.free, FreeSet{0});
  EXPECT_EQ(*sc.output_top, mt);
  EXPECT_TRUE(sc.output.empty());

  EXPECT_EQ(sc_advance(sc), SCRule::shift_complete_frame);
  EXPECT_EQ(sc.free, FreeSet{});
  EXPECT_EQ(sc.output_stack(), ContinuationStack::of(mt, {bind(I)}));

  EXPECT_EQ(sc_advance(sc), SCRule::pop_frame);
  EXPECT_EQ(sc.focus_env, RenamingEnv{0});
  EXPECT_TRUE(sc.done());
  EXPECT_EQ(sc_advance(sc), std::nullopt);
  EXPECT_EQ(sc.output_stack(), ContinuationStack::of(mt, {bind(I)}));

  const EvalState expected{v(0), {0}, ContinuationStack::of(mt, {bind(I)})};
  EXPECT_EQ(compact(s), expected);
  EXPECT_EQ(compact_stepwise(s), expected);
}

TEST(SC, TrivialCases) {
  const auto s = std::get<EvalState>(inject(omega()));
  EXPECT_EQ(compact(s), s);
  // Every bind referenced: nothing changes.
  const EvalState used{app(v(0), v(1)), {0, 0}, ContinuationStack::of(mt, {bind(I), bind(I)})};
  EXPECT_EQ(compact(used), used);
  // Search states are left alone.
  const MachineState search = SearchState{I, {}, {bind(I)}, {}};
  EXPECT_EQ(compact(search), search);
}

TEST(SC, PopShiftsOuterReferencesDown) {
  // 1 skips the unused bind in between; after the pop it is 0 away.
  const EvalState s{v(0), {1}, ContinuationStack::of(mt, {bind(I), bind(I)})};
  const EvalState expected{v(0), {0}, ContinuationStack::of(mt, {bind(I)})};
  EXPECT_EQ(compact(s), expected);
  EXPECT_EQ(harness::normalize(unload(compact(s))), harness::normalize(unload(s)));
}

TEST(SC, BatchedMatchesStepwise) {
  for (const auto& s : states()) ASSERT_EQ(compact(s), compact_stepwise(s)) << print(unload(s));
}

TEST(SC, PreservesMeaningAndIsIdempotent) {
  for (const auto& s : states()) {
    const EvalState once = compact(s);
    ASSERT_NO_THROW(check_well_formed(once, EnvLength::unchecked));
    ASSERT_EQ(harness::normalize(unload(once)), harness::normalize(unload(s))) << print(unload(s));
    ASSERT_EQ(compact(once), once);
  }
}

TEST(SC, EvaluationWithCompactionAgrees) {
  harness::TermGenerator g(42);
  for (int i = 0; i < 2000; ++i) {
    const Term t = g.closed(14);
    const auto plain = eval_ckplus(t, MachineBudget::reductions(500));
    for (auto policy : {CompactionPolicy::every(1), CompactionPolicy::every(5), CompactionPolicy::depth(1),
                        CompactionPolicy::depth(4)}) {
      const auto r = eval_ckplus_compacting(t, MachineBudget::reductions(500), policy);
      ASSERT_EQ(r.budget_exceeded(), plain.budget_exceeded()) << print(t);
      if (plain.answer) {
        ASSERT_EQ(harness::normalize(*r.answer), harness::normalize(*plain.answer)) << print(t);
      }
    }
  }
}

TEST(SC, UnusedChainStaysShallow) {
  for (std::size_t k : {10u, 100u, 1000u}) {
    const Term t = harness::unused_chain(k);
    const auto plain = eval_ckplus_compacting(t, MachineBudget::steps(1000000), CompactionPolicy::off());
    const auto small = eval_ckplus_compacting(t, MachineBudget::steps(1000000), CompactionPolicy::depth(2));
    ASSERT_TRUE(plain.answer);
    ASSERT_TRUE(small.answer);
    EXPECT_GE(plain.max_bind_count, k);
    EXPECT_LE(small.max_bind_count, 4u);
    EXPECT_EQ(harness::normalize(*small.answer), harness::normalize(*plain.answer));
  }
}

TEST(Policy, Parse) {
  EXPECT_EQ(CompactionPolicy::parse("off").trigger, CompactionPolicy::Trigger::off);
  EXPECT_EQ(CompactionPolicy::parse("manual").trigger, CompactionPolicy::Trigger::manual);
  EXPECT_EQ(CompactionPolicy::parse("every:5").amount, 5u);
  EXPECT_EQ(CompactionPolicy::parse("depth:4").trigger, CompactionPolicy::Trigger::depth);
  EXPECT_EQ(CompactionPolicy::parse("depth:4").to_string(), "depth:4");
  for (const char* bad : {"", "every", "every:", "every:0", "depth:-1", "depth:x", "sometimes:3"}) {
    EXPECT_THROW(CompactionPolicy::parse(bad), std::invalid_argument) << bad;
  }
}

TEST(Policy, ManualNeverFires) {
  const auto r = eval_ckplus_compacting(harness::unused_chain(20), MachineBudget::steps(100000),
                                        CompactionPolicy::manual());
  EXPECT_EQ(r.compactions, 0u);
  EXPECT_GE(r.max_bind_count, 20u);
}

TEST(NormalImage, MatchesNormalizedUnload) {
  harness::NormalImageCache cache;
  for (const auto& s : states()) {
    const MachineState m = s;
    const Term expected = harness::normalize(unload(m));
    ASSERT_EQ(harness::normal_image(m), expected) << print(unload(m));
    ASSERT_EQ(harness::normal_image(m, &cache), expected);
    ASSERT_EQ(harness::normal_image_digest(m, &cache), harness::digest(expected));
  }
}

TEST(NormalImage, SearchStates) {
  harness::TermGenerator g(43);
  harness::NormalImageCache cache;
  for (int i = 0; i < 500; ++i) {
    const Term t = g.closed(14);
    eval_ckplus(t, MachineBudget::reductions(200), [&](const StepInfo&, const MachineState& s) {
      if (std::holds_alternative<SearchState>(s)) {
        ASSERT_EQ(harness::normal_image(s, &cache), harness::normalize(unload(s)));
      }
    });
  }
}

}  // namespace
