#ifndef CBNEED_CKPLUS_HPP
#define CBNEED_CKPLUS_HPP

// The CK+ machine.
//
// The continuation stack keeps one partial frame on top and one complete
// (bind) frame per binder in scope below it. A variable n in focus therefore
// finds its binding n + R(n) complete frames below the top: locating it is
// index arithmetic on a random-access sequence, not a search.

#include <atomic>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cbneed/calculus.hpp"
#include "cbneed/renaming.hpp"
#include "cbneed/term.hpp"

namespace cbneed {

/// Identifies a binding across the moves the machine makes with its frame.
/// Used for instrumentation only; never part of state equality.
using BindingId = std::uint64_t;

inline BindingId fresh_binding_id() {
  static std::atomic<BindingId> next{1};
  return next.fetch_add(1, std::memory_order_relaxed);
}

struct ContinuationStack;

/// k ::= mt | arg(M, R)·k | op(Ŝ)·k
class PartialFrame {
 public:
  enum class Kind : std::uint8_t { mt, arg, op };

  PartialFrame() = default;

  static PartialFrame mt() { return {}; }
  static PartialFrame arg(Term term, RenamingEnv env, PartialFrame rest);
  static PartialFrame op(ContinuationStack saved, PartialFrame rest, BindingId binding = 0);

  Kind kind() const;
  bool is_mt() const { return node_ == nullptr; }
  bool is_arg() const { return kind() == Kind::arg; }
  bool is_op() const { return kind() == Kind::op; }
  bool same_node(const PartialFrame& other) const { return node_ == other.node_; }

  // Accessors below require the matching kind.
  const Term& term() const;
  const RenamingEnv& env() const;
  const ContinuationStack& saved() const;
  const PartialFrame& rest() const;
  BindingId binding() const;

  friend bool operator==(const PartialFrame& a, const PartialFrame& b);

 private:
  struct Node;
  explicit PartialFrame(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

/// K ::= bind(M, R)·k
struct CompleteFrame {
  Term arg;
  RenamingEnv env;
  PartialFrame inner;
  BindingId id = 0;

  /// Answer frames F are binds whose inner partial frame is mt.
  bool is_answer_frame() const { return inner.is_mt(); }

  friend bool operator==(const CompleteFrame& a, const CompleteFrame& b) {
    return a.arg == b.arg && a.env == b.env && a.inner == b.inner;
  }
};

/// Ŝ ::= ⟨k, K, …⟩
///
/// `below` is stored bottom-most first, so the frame right under the top
/// partial frame is `below.back()`. Use `complete(i)` for top-relative
/// access.
struct ContinuationStack {
  PartialFrame top;
  std::vector<CompleteFrame> below;

  /// Builds a stack from frames listed top first, as they are written.
  static ContinuationStack of(PartialFrame top, std::vector<CompleteFrame> top_first = {}) {
    return {std::move(top), {std::make_move_iterator(top_first.rbegin()),
                             std::make_move_iterator(top_first.rend())}};
  }

  /// |Ŝ|, counting the top partial frame.
  std::size_t size() const { return below.size() + 1; }
  std::size_t complete_count() const { return below.size(); }

  /// The i-th complete frame counted from the top (0 = just under `top`).
  const CompleteFrame& complete(std::size_t i) const { return below[below.size() - 1 - i]; }

  friend bool operator==(const ContinuationStack&, const ContinuationStack&) = default;
};

struct PartialFrame::Node {
  Kind kind;
  Term term;
  RenamingEnv env;
  std::shared_ptr<const ContinuationStack> saved;
  PartialFrame rest;
  BindingId binding = 0;
};

inline PartialFrame PartialFrame::arg(Term term, RenamingEnv env, PartialFrame rest) {
  return PartialFrame(std::make_shared<const Node>(
      Node{Kind::arg, std::move(term), std::move(env), nullptr, std::move(rest), 0}));
}

inline PartialFrame PartialFrame::op(ContinuationStack saved, PartialFrame rest,
                                     BindingId binding) {
  return PartialFrame(std::make_shared<const Node>(
      Node{Kind::op, Term(), RenamingEnv(),
           std::make_shared<const ContinuationStack>(std::move(saved)), std::move(rest),
           binding}));
}

inline PartialFrame::Kind PartialFrame::kind() const { return node_ ? node_->kind : Kind::mt; }
inline const Term& PartialFrame::term() const { return node_->term; }
inline const RenamingEnv& PartialFrame::env() const { return node_->env; }
inline const ContinuationStack& PartialFrame::saved() const { return *node_->saved; }
inline const PartialFrame& PartialFrame::rest() const { return node_->rest; }
inline BindingId PartialFrame::binding() const { return node_->binding; }

inline bool operator==(const PartialFrame& a, const PartialFrame& b) {
  const PartialFrame* x = &a;
  const PartialFrame* y = &b;
  for (;;) {
    if (x->node_ == y->node_) return true;
    if (x->kind() != y->kind()) return false;
    if (x->is_arg()) {
      if (x->term() != y->term() || x->env() != y->env()) return false;
    } else if (!(x->saved() == y->saved())) {
      return false;
    }
    x = &x->rest();
    y = &y->rest();
  }
}

/// ⟨C, R, Ŝ⟩
struct EvalState {
  Term control;
  RenamingEnv env;
  ContinuationStack stack;

  friend bool operator==(const EvalState&, const EvalState&) = default;
};

/// ⟨V, R, ⟨F…, K…⟩, Â⟩ while the machine peels answer frames.
struct SearchState {
  Term value;
  RenamingEnv env;
  /// Frames not yet inspected, bottom-most first (like ContinuationStack::below).
  std::vector<CompleteFrame> remaining;
  /// The F frames of Â = ⟨mt, F…⟩, innermost (first shifted) first.
  std::vector<CompleteFrame> answers;

  bool is_final() const { return remaining.empty(); }
  friend bool operator==(const SearchState&, const SearchState&) = default;
};

using MachineState = std::variant<EvalState, SearchState>;

enum class Rule : std::uint8_t {
  shift_arg,
  descend_lambda,
  lookup_arg,
  resume,
  ans_search1,
  ans_search2,
  assoc_l,
  assoc_r,
};

inline std::string_view rule_name(Rule r) {
  switch (r) {
    case Rule::shift_arg: return "shift-arg";
    case Rule::descend_lambda: return "descend-λ";
    case Rule::lookup_arg: return "lookup-arg";
    case Rule::resume: return "resume";
    case Rule::ans_search1: return "ans-search1";
    case Rule::ans_search2: return "ans-search2";
    case Rule::assoc_l: return "assoc-L";
    case Rule::assoc_r: return "assoc-R";
  }
  return "?";
}

inline std::optional<Rule> rule_from_name(std::string_view name) {
  for (auto r : {Rule::shift_arg, Rule::descend_lambda, Rule::lookup_arg, Rule::resume,
                 Rule::ans_search1, Rule::ans_search2, Rule::assoc_l, Rule::assoc_r}) {
    if (rule_name(r) == name) return r;
  }
  if (name == "descend-lambda") return Rule::descend_lambda;
  return std::nullopt;
}

/// The rules that perform a calculus reduction; the rest only move context.
inline bool is_reduction(Rule r) {
  return r == Rule::resume || r == Rule::assoc_l || r == Rule::assoc_r;
}

/// Deliberate defects, for checking that the harness notices them.
enum class Mutation : std::uint8_t {
  none,
  /// assoc-L re-binds the operand and the bound argument in swapped order.
  swap_assoc_l,
};

struct MachineOptions {
  Mutation mutation = Mutation::none;
  /// Fuse [assoc-R] with the [resume] that always follows it, so one machine
  /// step performs two reductions. Off by default: every reducing step then
  /// corresponds to exactly one standard-reduction step.
  bool fused_assoc_r = false;
};

/// What a single transition did, beyond the new state.
struct StepInfo {
  Rule rule;
  /// For lookup-arg: the binding demanded, and whether it already held a value.
  BindingId binding = 0;
  bool argument_is_value = false;
  /// Complete frames at the bottom of the stack (`below`, or `remaining` in
  /// search mode) that the step left in place.
  std::size_t kept = 0;
};

/// ⟨M, (), ⟨mt⟩⟩. Rejects open programs.
inline MachineState inject(const Term& t) {
  require_closed(t);
  return EvalState{t, RenamingEnv(), ContinuationStack()};
}

/// Ŝ ↑ x: add_all on every environment stored anywhere in the stack,
/// including stacks saved inside op frames.
ContinuationStack bump(const ContinuationStack& s, Index x);

namespace detail {

inline PartialFrame bump(const PartialFrame& k, Index x) {
  switch (k.kind()) {
    case PartialFrame::Kind::mt:
      return k;
    case PartialFrame::Kind::arg:
      return PartialFrame::arg(k.term(), add_all(k.env(), x), bump(k.rest(), x));
    case PartialFrame::Kind::op:
      return PartialFrame::op(cbneed::bump(k.saved(), x), bump(k.rest(), x), k.binding());
  }
  return k;
}

inline CompleteFrame bump(const CompleteFrame& f, Index x) {
  return {f.arg, add_all(f.env, x), bump(f.inner, x), f.id};
}

}  // namespace detail

inline ContinuationStack bump(const ContinuationStack& s, Index x) {
  if (x == 0) return s;
  ContinuationStack out{detail::bump(s.top, x), {}};
  out.below.reserve(s.below.size());
  for (const auto& f : s.below) out.below.push_back(detail::bump(f, x));
  return out;
}

/// (Ŝ ⇕ (x, base)): moves by x every offset in `s` whose variable reaches past
/// a binding sitting `base` binds below the bottom of `s`. References to that
/// binding, and to binds inside `s`, are left alone. Stacks saved in op frames
/// sit under one more binder and are adjusted with the limit raised by one.
ContinuationStack adjust_past(const ContinuationStack& s, Offset x, Index base);

namespace detail {

inline Offset signed_index(Index i) { return to_offset(i); }

// `limit`: effective index of the binding as seen from this frame's scope.
inline PartialFrame adjust_past(const PartialFrame& k, Offset x, Index limit) {
  switch (k.kind()) {
    case PartialFrame::Kind::mt:
      return k;
    case PartialFrame::Kind::arg:
      return PartialFrame::arg(k.term(), adjust(k.term(), k.env(), x, signed_index(limit)),
                               adjust_past(k.rest(), x, limit));
    case PartialFrame::Kind::op:
      return PartialFrame::op(cbneed::adjust_past(k.saved(), x, limit + 1),
                              adjust_past(k.rest(), x, limit), k.binding());
  }
  return k;
}

}  // namespace detail

inline ContinuationStack adjust_past(const ContinuationStack& s, Offset x, Index base) {
  if (x == 0) return s;
  ContinuationStack out;
  out.below.reserve(s.below.size());
  for (std::size_t i = 0; i < s.below.size(); ++i) {
    const CompleteFrame& f = s.below[i];
    const Index limit = base + i;  // i binds of `s` lie below this frame
    out.below.push_back(CompleteFrame{f.arg, adjust(f.arg, f.env, x, detail::signed_index(limit)),
                                      detail::adjust_past(f.inner, x, limit), f.id});
  }
  out.top = detail::adjust_past(s.top, x, base + s.below.size());
  return out;
}

/// Performs one transition in place. Returns nullopt on a final state and
/// throws MalformedState when no rule applies to a non-final state.
inline std::optional<StepInfo> advance(MachineState& state, const MachineOptions& options = {}) {
  if (auto* e = std::get_if<EvalState>(&state)) {
    auto& stack = e->stack;
    switch (e->control.kind()) {
      case TermKind::app: {
        stack.top = PartialFrame::arg(e->control.arg(), e->env, std::move(stack.top));
        e->control = e->control.fn();
        return StepInfo{Rule::shift_arg, 0, false, stack.below.size()};
      }
      case TermKind::var: {
        const Index n = e->control.index();
        const Index distance = effective_index(e->env, n);
        if (distance >= stack.below.size()) {
          throw MalformedState("lookup-arg: variable " + std::to_string(n) + " reaches frame " +
                               std::to_string(distance + 1) + " of a stack with " +
                               std::to_string(stack.size()) + " frames");
        }
        const std::size_t pos = stack.below.size() - 1 - distance;
        CompleteFrame target = std::move(stack.below[pos]);
        ContinuationStack saved{std::move(stack.top), {}};
        saved.below.assign(std::make_move_iterator(stack.below.begin() + pos + 1),
                           std::make_move_iterator(stack.below.end()));
        stack.below.resize(pos);
        StepInfo info{Rule::lookup_arg, target.id, target.arg.is_value(), pos};
        stack.top = PartialFrame::op(std::move(saved), std::move(target.inner), target.id);
        e->control = std::move(target.arg);
        e->env = std::move(target.env);
        return info;
      }
      case TermKind::lam:
        break;
    }

    switch (stack.top.kind()) {
      case PartialFrame::Kind::arg: {
        PartialFrame k = stack.top;
        const std::size_t kept = stack.below.size();
        stack.below.push_back(CompleteFrame{k.term(), k.env(), k.rest(), fresh_binding_id()});
        stack.top = PartialFrame::mt();
        e->control = e->control.body();
        e->env = e->env.push_front(0);
        return StepInfo{Rule::descend_lambda, 0, false, kept};
      }
      case PartialFrame::Kind::op: {
        PartialFrame k = stack.top;
        const ContinuationStack& saved = k.saved();
        const std::size_t kept = stack.below.size();
        stack.below.push_back(CompleteFrame{e->control, e->env, k.rest(), k.binding()});
        stack.below.insert(stack.below.end(), saved.below.begin(), saved.below.end());
        stack.top = saved.top;
        e->env = add_all(e->env, saved.size());
        return StepInfo{Rule::resume, 0, false, kept};
      }
      case PartialFrame::Kind::mt: {
        const std::size_t kept = stack.below.size();
        state = SearchState{std::move(e->control), std::move(e->env), std::move(stack.below), {}};
        return StepInfo{Rule::ans_search1, 0, false, kept};
      }
    }
  }

  auto& s = std::get<SearchState>(state);
  if (s.remaining.empty()) return std::nullopt;
  if (s.remaining.back().is_answer_frame()) {
    s.answers.push_back(std::move(s.remaining.back()));
    s.remaining.pop_back();
    return StepInfo{Rule::ans_search2, 0, false, s.remaining.size()};
  }

  CompleteFrame frame = std::move(s.remaining.back());
  s.remaining.pop_back();
  const Index lift = checked_add(s.answers.size(), 1);
  const std::size_t kept = s.remaining.size();
  std::vector<CompleteFrame> below = std::move(s.remaining);
  const PartialFrame& inner = frame.inner;

  if (inner.is_arg()) {
    if (!s.value.is_lam()) throw MalformedState("assoc-L: answer value is not an abstraction");
    Term operand = inner.term();
    Term bound = std::move(frame.arg);
    if (options.mutation == Mutation::swap_assoc_l) std::swap(operand, bound);
    below.push_back(CompleteFrame{std::move(bound), std::move(frame.env), inner.rest(), frame.id});
    below.insert(below.end(), std::make_move_iterator(s.answers.rbegin()),
                 std::make_move_iterator(s.answers.rend()));
    below.push_back(CompleteFrame{std::move(operand), add_all(inner.env(), lift),
                                  PartialFrame::mt(), fresh_binding_id()});
    state = EvalState{s.value.body(), s.env.push_front(0),
                      ContinuationStack{PartialFrame::mt(), std::move(below)}};
    return StepInfo{Rule::assoc_l, 0, false, kept};
  }

  // assoc-R: the answer was the argument demanded from inside `saved`.
  ContinuationStack saved = adjust_past(inner.saved(), detail::signed_index(lift), 0);
  below.push_back(CompleteFrame{std::move(frame.arg), std::move(frame.env), inner.rest(), frame.id});
  below.insert(below.end(), std::make_move_iterator(s.answers.rbegin()),
               std::make_move_iterator(s.answers.rend()));
  if (!options.fused_assoc_r) {
    // The value is left in front of the demanding context; [resume] follows.
    PartialFrame demand = PartialFrame::op(std::move(saved), PartialFrame::mt(), inner.binding());
    state = EvalState{std::move(s.value), std::move(s.env),
                      ContinuationStack{std::move(demand), std::move(below)}};
    return StepInfo{Rule::assoc_r, 0, false, kept};
  }
  const std::size_t saved_size = saved.size();
  below.push_back(CompleteFrame{s.value, s.env, PartialFrame::mt(), inner.binding()});
  below.insert(below.end(), std::make_move_iterator(saved.below.begin()),
               std::make_move_iterator(saved.below.end()));
  RenamingEnv env = add_all(s.env, saved_size);
  state = EvalState{std::move(s.value), std::move(env),
                    ContinuationStack{std::move(saved.top), std::move(below)}};
  return StepInfo{Rule::assoc_r, 0, false, kept};
}

struct StepRecord {
  Rule rule;
  MachineState before;
  MachineState after;
};

/// Pure form of `advance`: nullopt on a final state.
inline std::optional<StepRecord> step(const MachineState& s, const MachineOptions& options = {}) {
  MachineState next = s;
  auto info = advance(next, options);
  if (!info) return std::nullopt;
  return StepRecord{info->rule, s, std::move(next)};
}

inline bool is_final(const MachineState& s) {
  const auto* search = std::get_if<SearchState>(&s);
  return search != nullptr && search->is_final();
}

// φ: machine states back to terms.

Term plug(const ContinuationStack& s, Term t);

inline Term plug(const PartialFrame& k, Term t) {
  for (const PartialFrame* f = &k; !f->is_mt(); f = &f->rest()) {
    if (f->is_arg()) {
      t = Term::app(std::move(t), apply(f->env(), f->term()));
    } else {
      const ContinuationStack& saved = f->saved();
      Term demand = Term::var(saved.size() - 1);
      t = Term::app(Term::lam(cbneed::plug(saved, std::move(demand))), std::move(t));
    }
  }
  return t;
}

inline Term plug(const CompleteFrame& f, Term t) {
  return plug(f.inner, Term::app(Term::lam(std::move(t)), apply(f.env, f.arg)));
}

inline Term plug(const ContinuationStack& s, Term t) {
  t = plug(s.top, std::move(t));
  for (auto it = s.below.rbegin(); it != s.below.rend(); ++it) t = plug(*it, std::move(t));
  return t;
}

/// φ. For search states the answer frames are plugged before the remaining
/// stack.
inline Term unload(const MachineState& state) {
  if (const auto* e = std::get_if<EvalState>(&state)) {
    return plug(e->stack, apply(e->env, e->control));
  }
  const auto& s = std::get<SearchState>(state);
  Term t = apply(s.env, s.value);
  for (const auto& f : s.answers) t = plug(f, std::move(t));
  for (auto it = s.remaining.rbegin(); it != s.remaining.rend(); ++it) t = plug(*it, std::move(t));
  return t;
}

/// Step and reduction caps for a machine run; either one ends the run.
struct MachineBudget {
  std::uint64_t max_steps = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t max_reductions = std::numeric_limits<std::uint64_t>::max();

  static MachineBudget steps(std::uint64_t n) { return {n, std::numeric_limits<std::uint64_t>::max()}; }
  static MachineBudget reductions(std::uint64_t n) { return {std::numeric_limits<std::uint64_t>::max(), n}; }
};

/// Runs the machine from inject(t). On reaching a final state the answer is
/// its unloading. A reduction cap of B admits exactly the runs whose
/// standard-reduction counterpart needs at most B reductions.
template <typename Observer>
  requires std::invocable<Observer&, const StepInfo&, const MachineState&>
EvalResult eval_ckplus(const Term& t, MachineBudget budget, Observer&& observe,
                       const MachineOptions& options = {}) {
  MachineState state = inject(t);
  EvalResult result;
  for (;;) {
    if (is_final(state)) {
      result.answer = unload(state);
      return result;
    }
    if (result.steps == budget.max_steps) return result;
    // Reductions are counted when they happen, so check the cap before a
    // step that would exceed it.
    auto info = [&] {
      if (result.reductions == budget.max_reductions) {
        MachineState probe = state;
        auto i = advance(probe, options);
        if (i && is_reduction(i->rule)) return std::optional<StepInfo>{};
        state = std::move(probe);
        return i;
      }
      return advance(state, options);
    }();
    if (!info) return result;
    ++result.steps;
    if (is_reduction(info->rule)) ++result.reductions;
    observe(*info, std::as_const(state));
  }
}

inline EvalResult eval_ckplus(const Term& t, MachineBudget budget,
                              const MachineOptions& options = {}) {
  return eval_ckplus(t, budget, [](const StepInfo&, const MachineState&) {}, options);
}

/// Budget counted in machine steps (all eight rules).
inline EvalResult eval_ckplus(const Term& t, std::uint64_t step_budget) {
  return eval_ckplus(t, MachineBudget::steps(step_budget));
}

struct StackMetrics {
  std::size_t depth = 0;
  std::size_t bind_count = 0;
  std::size_t answer_frames = 0;
};

/// Eval: frames in the stack (partial included) and binds among them.
/// Search: frames still to inspect, binds overall, and answer frames peeled.
inline StackMetrics stack_metrics(const MachineState& state) {
  if (const auto* e = std::get_if<EvalState>(&state)) {
    return {e->stack.size(), e->stack.complete_count(), 0};
  }
  const auto& s = std::get<SearchState>(state);
  return {s.remaining.size(), s.remaining.size() + s.answers.size(), s.answers.size()};
}

namespace detail {

inline void check_pair(const Term& t, const RenamingEnv& r, std::size_t scope, const char* where,
                       bool bounded_env) {
  if (bounded_env && r.size() > scope) {
    throw MalformedState(std::string(where) + ": environment has " + std::to_string(r.size()) +
                         " slots but only " + std::to_string(scope) + " binds are in scope");
  }
  t.for_each_free([&](Index n) {
    if (n >= r.size() || effective_index(r, n) >= scope) {
      throw MalformedState(std::string(where) + ": variable " + std::to_string(n) +
                           " reaches past the stack");
    }
  });
}

void check_stack(const ContinuationStack& s, std::size_t outside, bool bounded_env);

inline void check_partial(const PartialFrame& k, std::size_t scope, bool bounded_env) {
  for (const PartialFrame* f = &k; !f->is_mt(); f = &f->rest()) {
    if (f->is_arg()) {
      check_pair(f->term(), f->env(), scope, "arg frame", bounded_env);
    } else {
      check_stack(f->saved(), scope + 1, bounded_env);
    }
  }
}

inline void check_complete(const CompleteFrame& f, std::size_t scope, bool bounded_env) {
  check_pair(f.arg, f.env, scope, "bind frame", bounded_env);
  check_partial(f.inner, scope, bounded_env);
}

// `outside` counts the binds enclosing the whole stack.
inline void check_stack(const ContinuationStack& s, std::size_t outside, bool bounded_env) {
  for (std::size_t i = 0; i < s.below.size(); ++i) {
    check_complete(s.below[i], outside + i, bounded_env);
  }
  check_partial(s.top, outside + s.below.size(), bounded_env);
}

}  // namespace detail

/// How strictly to treat environment length. Plain CK+ runs never hold more
/// slots than binds in scope; after compaction, slots of variables that no
/// longer occur may outlive the binds they referred to.
enum class EnvLength : std::uint8_t { bounded, unchecked };

/// Throws MalformedState unless every free variable of every stored term has
/// a slot and resolves to a bind inside the stack, and (with
/// EnvLength::bounded) no environment has more slots than binds in scope.
///
/// Environments may be shorter than the scope: [resume] moves a value
/// together with the environment of its origin and only raises its offsets.
inline void check_well_formed(const MachineState& state, EnvLength mode = EnvLength::bounded) {
  const bool bounded = mode == EnvLength::bounded;
  if (const auto* e = std::get_if<EvalState>(&state)) {
    detail::check_stack(e->stack, 0, bounded);
    detail::check_pair(e->control, e->env, e->stack.complete_count(), "control", bounded);
    return;
  }
  const auto& s = std::get<SearchState>(state);
  if (!s.value.is_lam()) throw MalformedState("search state holds a non-value");
  for (std::size_t i = 0; i < s.remaining.size(); ++i) {
    detail::check_complete(s.remaining[i], i, bounded);
  }
  const std::size_t base = s.remaining.size();
  for (std::size_t i = 0; i < s.answers.size(); ++i) {
    if (!s.answers[i].is_answer_frame()) throw MalformedState("answer stack holds a non-answer frame");
    detail::check_complete(s.answers[i], base + s.answers.size() - 1 - i, bounded);
  }
  detail::check_pair(s.value, s.env, base + s.answers.size(), "answer value", bounded);
}

/// check_well_formed over a whole run, re-examining only what each step
/// touched. A complete frame's validity depends on its contents and its
/// distance from the bottom of the stack, and steps leave a bottom segment of
/// the stack alone, so frames verified once stay verified until a step
/// removes them.
class WellFormedTracker {
 public:
  explicit WellFormedTracker(EnvLength mode = EnvLength::bounded)
      : bounded_(mode == EnvLength::bounded) {}

  /// The state right after injection, or any state checked from scratch.
  void reset(const MachineState& s) {
    bottom_ = answers_ = 0;
    check(s);
  }

  /// The state after a step that reported `info`.
  void after(const StepInfo& info, const MachineState& s) {
    bottom_ = std::min(bottom_, info.kept);
    if (info.rule != Rule::ans_search2) answers_ = 0;
    check(s);
  }

 private:
  void check(const MachineState& state) {
    if (const auto* e = std::get_if<EvalState>(&state)) {
      for (; bottom_ < e->stack.below.size(); ++bottom_) {
        detail::check_complete(e->stack.below[bottom_], bottom_, bounded_);
      }
      const std::size_t scope = e->stack.complete_count();
      detail::check_partial(e->stack.top, scope, bounded_);
      detail::check_pair(e->control, e->env, scope, "control", bounded_);
      return;
    }
    const auto& s = std::get<SearchState>(state);
    if (!s.value.is_lam()) throw MalformedState("search state holds a non-value");
    bottom_ = std::min(bottom_, s.remaining.size());
    for (; bottom_ < s.remaining.size(); ++bottom_) {
      detail::check_complete(s.remaining[bottom_], bottom_, bounded_);
    }
    const std::size_t base = s.remaining.size();
    // Answer frames keep their position: the i-th peeled sat at base+count-1-i.
    for (; answers_ < s.answers.size(); ++answers_) {
      const auto& f = s.answers[answers_];
      if (!f.is_answer_frame()) throw MalformedState("answer stack holds a non-answer frame");
      detail::check_complete(f, base + s.answers.size() - 1 - answers_, bounded_);
    }
    detail::check_pair(s.value, s.env, base + s.answers.size(), "answer value", bounded_);
  }

  bool bounded_;
  std::size_t bottom_ = 0;
  std::size_t answers_ = 0;
};

}  // namespace cbneed

#endif  // CBNEED_CKPLUS_HPP
