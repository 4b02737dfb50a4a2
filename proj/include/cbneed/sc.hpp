#ifndef CBNEED_SC_HPP
#define CBNEED_SC_HPP

// Stack compaction. The SC machine scans a CK+ stack from the top, keeping
// the set of distances (in binds below the scan point) that something already
// scanned still refers to. A bind frame nobody refers to is popped; offsets
// that reached past it shrink by one and its outer context is grafted onto the
// bottom of what has been kept.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbneed/ckplus.hpp"

namespace cbneed {

using FreeSet = std::set<Index>;

/// Every n + R(n) - m over free variables n of `t` with n + R(n) >= m.
inline FreeSet fv_term(const Term& t, const RenamingEnv& r, Index m) {
  FreeSet out;
  t.for_each_free([&](Index n) {
    const Index reach = effective_index(r, n);
    if (reach >= m) out.insert(reach - m);
  });
  return out;
}

FreeSet fv_stack(const ContinuationStack& s, Index m);

inline FreeSet fv_frame(const PartialFrame& k, Index m) {
  FreeSet out;
  for (const PartialFrame* f = &k; !f->is_mt(); f = &f->rest()) {
    FreeSet part = f->is_arg() ? fv_term(f->term(), f->env(), m) : fv_stack(f->saved(), m + 1);
    out.merge(part);
  }
  return out;
}

inline FreeSet fv_frame(const CompleteFrame& f, Index m) {
  FreeSet out = fv_term(f.arg, f.env, m);
  FreeSet inner = fv_frame(f.inner, m);
  out.merge(inner);
  return out;
}

/// `m` counts binders between the reference point and the bottom of `s`.
inline FreeSet fv_stack(const ContinuationStack& s, Index m) {
  FreeSet out;
  for (std::size_t i = 0; i < s.below.size(); ++i) {
    FreeSet part = fv_frame(s.below[i], m + i);
    out.merge(part);
  }
  FreeSet top = fv_frame(s.top, m + s.below.size());
  out.merge(top);
  return out;
}

/// Moves the scan point one frame down: 0 refers to the frame just scanned
/// and drops out.
inline FreeSet dec(const FreeSet& f) {
  FreeSet out;
  for (Index d : f) {
    if (d >= 1) out.insert(out.end(), d - 1);
  }
  return out;
}

/// k' @ k: k replaces the mt at the end of k'.
inline PartialFrame merge(const PartialFrame& outer, const PartialFrame& k) {
  switch (outer.kind()) {
    case PartialFrame::Kind::mt:
      return k;
    case PartialFrame::Kind::arg:
      return PartialFrame::arg(outer.term(), outer.env(), merge(outer.rest(), k));
    case PartialFrame::Kind::op:
      return PartialFrame::op(outer.saved(), merge(outer.rest(), k), outer.binding());
  }
  return k;
}

/// Ŝ @ k: grafts k at the innermost rest position of the bottom frame.
inline ContinuationStack merge(ContinuationStack s, const PartialFrame& k) {
  if (s.below.empty()) {
    s.top = merge(s.top, k);
  } else {
    s.below.front().inner = merge(s.below.front().inner, k);
  }
  return s;
}

enum class SCRule : std::uint8_t { shift_partial_frame, shift_complete_frame, pop_frame };

inline std::string_view sc_rule_name(SCRule r) {
  switch (r) {
    case SCRule::shift_partial_frame: return "shift-partial-frame";
    case SCRule::shift_complete_frame: return "shift-complete-frame";
    case SCRule::pop_frame: return "pop-frame";
  }
  return "?";
}

/// ⟨F, (M, R), input, output⟩
struct SCState {
  FreeSet free;
  Term focus;
  RenamingEnv focus_env;
  /// The input's partial frame, until it has been shifted.
  std::optional<PartialFrame> input_top;
  /// Complete frames still to scan, bottom-most first: back() is next.
  std::vector<CompleteFrame> input;
  /// The kept partial frame, once shifted.
  std::optional<PartialFrame> output_top;
  /// Kept complete frames, top first: the newest is back().
  std::vector<CompleteFrame> output;

  bool done() const { return !input_top && input.empty(); }

  /// The kept frames as a continuation stack.
  ContinuationStack output_stack() const {
    if (!output_top) throw MalformedState("SC: no partial frame shifted yet");
    return ContinuationStack::of(*output_top, output);
  }
};

inline SCState sc_inject(const EvalState& s) {
  return SCState{fv_term(s.control, s.env, 0), s.control, s.env, s.stack.top, s.stack.below,
                 std::nullopt, {}};
}

/// One SC transition in place; nullopt when the input is exhausted.
inline std::optional<SCRule> sc_advance(SCState& s) {
  if (s.input_top) {
    if (s.output_top) throw MalformedState("SC: second partial frame in input");
    FreeSet more = fv_frame(*s.input_top, 0);
    s.free.merge(more);
    s.output_top = std::move(*s.input_top);
    s.input_top.reset();
    return SCRule::shift_partial_frame;
  }
  if (s.input.empty()) return std::nullopt;
  if (!s.output_top) throw MalformedState("SC: complete frame before the partial frame");

  CompleteFrame frame = std::move(s.input.back());
  s.input.pop_back();

  if (s.free.count(0) != 0) {
    FreeSet next = dec(s.free);
    FreeSet more = fv_frame(frame, 0);
    next.merge(more);
    s.free = std::move(next);
    s.output.push_back(std::move(frame));
    return SCRule::shift_complete_frame;
  }

  // Nothing kept so far refers to this bind. Its outer context stays and is
  // scanned with the frames below, so its references stay live.
  FreeSet next = dec(s.free);
  FreeSet more = fv_frame(frame.inner, 0);
  next.merge(more);
  s.free = std::move(next);

  const Index kept = s.output.size();
  s.focus_env = adjust(s.focus, s.focus_env, -1, detail::signed_index(kept));
  for (Index i = 0; i < kept; ++i) {
    CompleteFrame& f = s.output[i];
    const Index limit = kept - 1 - i;
    f.env = adjust(f.arg, f.env, -1, detail::signed_index(limit));
    f.inner = detail::adjust_past(f.inner, -1, limit);
  }
  *s.output_top = detail::adjust_past(*s.output_top, -1, kept);

  if (s.output.empty()) {
    *s.output_top = merge(*s.output_top, frame.inner);
  } else {
    s.output.back().inner = merge(s.output.back().inner, frame.inner);
  }
  return SCRule::pop_frame;
}

struct SCStepRecord {
  SCRule rule;
  SCState after;
};

inline std::optional<SCStepRecord> sc_step(const SCState& s) {
  SCState next = s;
  auto rule = sc_advance(next);
  if (!rule) return std::nullopt;
  return SCStepRecord{*rule, std::move(next)};
}

/// Runs the SC machine transition by transition.
inline EvalState compact_stepwise(const EvalState& s) {
  SCState sc = sc_inject(s);
  while (sc_advance(sc)) {
  }
  return EvalState{s.control, std::move(sc.focus_env), sc.output_stack()};
}

namespace detail {

// Same result as compact_stepwise, with the offset adjustments of all pops
// applied at the end. Which frames go is decided by the original environments
// alone, so the scan runs first. At pop p the threshold for a piece of the
// output is kept(p) + c, with c fixed per piece; kept(p) never decreases, so a
// slot of reach r loses one per pop until r no longer exceeds the threshold.
// With W[p] = kept(p) + p strictly increasing, a piece that joined the output
// before pop a loses #{p >= a : W[p] < r + a - c}.
class BatchedCompaction {
 public:
  explicit BatchedCompaction(const EvalState& s) : source_(s) {}

  EvalState run() {
    const auto& below = source_.stack.below;
    // The free set as a sorted vector; `more` collects one frame's references.
    std::vector<Index> free;
    std::vector<Index> more;
    collect(source_.control, source_.env, 0, more);
    collect(source_.stack.top, 0, more);
    settle(free, more, false);
    hosts_.push_back(Host{nullptr, {{&source_.stack.top, 0}}, 0});
    for (std::size_t i = below.size(); i-- > 0;) {
      const CompleteFrame& frame = below[i];
      const bool used = !free.empty() && free.front() == 0;
      if (used) {
        collect(frame.arg, frame.env, 0, more);
        collect(frame.inner, 0, more);
        hosts_.push_back(Host{&frame, {{&frame.inner, pops()}}, pops()});
      } else {
        collect(frame.inner, 0, more);
        w_.push_back(static_cast<Offset>(hosts_.size() - 1 + pops()));
        if (!frame.inner.is_mt()) hosts_.back().chain.push_back({&frame.inner, pops()});
      }
      settle(free, more, true);
    }

    RenamingEnv env = adjusted(source_.env, 0, 0);
    std::vector<CompleteFrame> output;
    output.reserve(hosts_.size() - 1);
    for (std::size_t i = 1; i < hosts_.size(); ++i) {
      const Host& h = hosts_[i];
      const Offset c = -static_cast<Offset>(i);  // kept - 1 - (i - 1)
      output.push_back(CompleteFrame{h.frame->arg, adjusted(h.frame->env, h.joined, c),
                                     chain(h, c), h.frame->id});
    }
    PartialFrame top = chain(hosts_[0], 0);
    return EvalState{source_.control, std::move(env), ContinuationStack::of(std::move(top), output)};
  }

 private:
  struct Segment {
    const PartialFrame* frames;
    std::size_t joined;  // pops before this segment became part of the output
  };
  struct Host {
    const CompleteFrame* frame;  // null for the partial frame
    std::vector<Segment> chain;
    std::size_t joined;
  };

  std::size_t pops() const { return w_.size(); }

  // free := dec(free) ∪ more when `step`, else free ∪ more; more is emptied.
  static void settle(std::vector<Index>& free, std::vector<Index>& more, bool step) {
    if (step) {
      std::size_t k = 0;
      for (Index d : free) {
        if (d >= 1) free[k++] = d - 1;
      }
      free.resize(k);
    }
    if (more.empty()) return;
    const std::size_t mid = free.size();
    free.insert(free.end(), more.begin(), more.end());
    std::sort(free.begin() + static_cast<std::ptrdiff_t>(mid), free.end());
    std::inplace_merge(free.begin(), free.begin() + static_cast<std::ptrdiff_t>(mid), free.end());
    free.erase(std::unique(free.begin(), free.end()), free.end());
    more.clear();
  }

  // Same sets as fv_term, fv_frame and fv_stack, appended to `out`.
  static void collect(const Term& t, const RenamingEnv& r, Index m, std::vector<Index>& out) {
    t.for_each_free([&](Index n) {
      const Index reach = effective_index(r, n);
      if (reach >= m) out.push_back(reach - m);
    });
  }
  static void collect(const PartialFrame& k, Index m, std::vector<Index>& out) {
    for (const PartialFrame* f = &k; !f->is_mt(); f = &f->rest()) {
      if (f->is_arg()) {
        collect(f->term(), f->env(), m, out);
      } else {
        collect(f->saved(), m + 1, out);
      }
    }
  }
  static void collect(const ContinuationStack& s, Index m, std::vector<Index>& out) {
    for (std::size_t i = 0; i < s.below.size(); ++i) {
      collect(s.below[i].arg, s.below[i].env, m + i, out);
      collect(s.below[i].inner, m + i, out);
    }
    collect(s.top, m + s.below.size(), out);
  }

  RenamingEnv adjusted(const RenamingEnv& r, std::size_t joined, Offset c) const {
    if (joined >= w_.size() || r.empty()) return r;
    const auto first = w_.begin() + static_cast<std::ptrdiff_t>(joined);
    std::vector<Offset> out;
    out.reserve(r.size());
    bool changed = false;
    Offset j = 0;
    for (Offset offset : r.offsets()) {
      const Offset reach = add_offsets(j, offset);
      const Offset bound = reach + static_cast<Offset>(joined) - c;
      const auto lost = std::lower_bound(first, w_.end(), bound) - first;
      if (lost != 0) changed = true;
      out.push_back(offset - lost);
      ++j;
    }
    return changed ? RenamingEnv(std::move(out)) : r;
  }

  // Rebuilds only what changes; untouched frames are shared.
  PartialFrame adjusted(const PartialFrame& k, const PartialFrame& rest, std::size_t joined,
                        Offset c) const {
    switch (k.kind()) {
      case PartialFrame::Kind::mt:
        return rest;
      case PartialFrame::Kind::arg: {
        RenamingEnv env = adjusted(k.env(), joined, c);
        PartialFrame tail = adjusted(k.rest(), rest, joined, c);
        if (env.identity() == k.env().identity() && tail.same_node(k.rest())) return k;
        return PartialFrame::arg(k.term(), std::move(env), std::move(tail));
      }
      case PartialFrame::Kind::op: {
        bool same = true;
        ContinuationStack saved = adjusted(k.saved(), joined, c + 1, same);
        PartialFrame tail = adjusted(k.rest(), rest, joined, c);
        if (same && tail.same_node(k.rest())) return k;
        return PartialFrame::op(std::move(saved), std::move(tail), k.binding());
      }
    }
    return rest;
  }

  ContinuationStack adjusted(const ContinuationStack& s, std::size_t joined, Offset c,
                             bool& same) const {
    same = true;
    if (joined >= w_.size()) return s;
    ContinuationStack out;
    out.below.reserve(s.below.size());
    for (std::size_t i = 0; i < s.below.size(); ++i) {
      const CompleteFrame& f = s.below[i];
      const Offset ci = c + static_cast<Offset>(i);
      CompleteFrame g{f.arg, adjusted(f.env, joined, ci),
                      adjusted(f.inner, PartialFrame::mt(), joined, ci), f.id};
      same = same && g.env.identity() == f.env.identity() && g.inner.same_node(f.inner);
      out.below.push_back(std::move(g));
    }
    out.top = adjusted(s.top, PartialFrame::mt(), joined,
                       c + static_cast<Offset>(s.below.size()));
    same = same && out.top.same_node(s.top);
    return out;
  }

  PartialFrame chain(const Host& h, Offset c) const {
    PartialFrame out = PartialFrame::mt();
    for (std::size_t i = h.chain.size(); i-- > 0;) {
      out = adjusted(*h.chain[i].frames, out, h.chain[i].joined, c);
    }
    return out;
  }

  const EvalState& source_;
  std::vector<Host> hosts_;
  std::vector<Offset> w_;
};

}  // namespace detail

/// The [sc] transition: drops every bind frame no live variable refers to.
inline EvalState compact(const EvalState& s) { return detail::BatchedCompaction(s).run(); }

/// Search states are returned unchanged; [sc] only applies to eval states.
inline MachineState compact(const MachineState& s) {
  if (const auto* e = std::get_if<EvalState>(&s)) return compact(*e);
  return s;
}

/// When to fire [sc] during a run.
struct CompactionPolicy {
  enum class Trigger : std::uint8_t { off, manual, every, depth };
  Trigger trigger = Trigger::off;
  std::uint64_t amount = 0;

  static CompactionPolicy off() { return {}; }
  static CompactionPolicy manual() { return {Trigger::manual, 0}; }
  /// After every n machine steps (at the next eval state if needed).
  static CompactionPolicy every(std::uint64_t n) { return checked({Trigger::every, n}); }
  /// Whenever an eval state holds more than d bind frames.
  static CompactionPolicy depth(std::uint64_t d) { return checked({Trigger::depth, d}); }

  /// off | manual | every:N | depth:D
  static CompactionPolicy parse(std::string_view text) {
    if (text == "off") return off();
    if (text == "manual") return manual();
    const auto colon = text.find(':');
    if (colon != std::string_view::npos) {
      const auto kind = text.substr(0, colon);
      const std::string number(text.substr(colon + 1));
      std::size_t used = 0;
      std::uint64_t value = 0;
      try {
        value = std::stoull(number, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == number.size() && !number.empty() && number[0] != '-') {
        if (kind == "every") return every(value);
        if (kind == "depth") return depth(value);
      }
    }
    throw std::invalid_argument("bad compaction policy \"" + std::string(text) +
                                "\" (want off, manual, every:N or depth:D)");
  }

  std::string to_string() const {
    switch (trigger) {
      case Trigger::off: return "off";
      case Trigger::manual: return "manual";
      case Trigger::every: return "every:" + std::to_string(amount);
      case Trigger::depth: return "depth:" + std::to_string(amount);
    }
    return "off";
  }

 private:
  static CompactionPolicy checked(CompactionPolicy p) {
    if (p.amount < 1) throw std::invalid_argument("compaction policy amount must be at least 1");
    return p;
  }
};

struct CompactingResult : EvalResult {
  std::uint64_t compactions = 0;
  /// Largest bind count over every state the machine passed through.
  std::size_t max_bind_count = 0;
};

/// eval_ckplus with [sc] interleaved per `policy`. Compaction does not count
/// against the budget. `observe(info, state)` sees each machine step and
/// `on_compact(before, after)` each compaction.
template <typename Observer, typename CompactObserver>
CompactingResult eval_ckplus_compacting(const Term& t, MachineBudget budget,
                                        CompactionPolicy policy, Observer&& observe,
                                        CompactObserver&& on_compact,
                                        const MachineOptions& options = {}) {
  CompactingResult result;
  std::uint64_t since_compaction = 0;
  auto track = [&result](const MachineState& s) {
    result.max_bind_count = std::max(result.max_bind_count, stack_metrics(s).bind_count);
  };
  auto due = [&](const MachineState& s) {
    if (!std::holds_alternative<EvalState>(s)) return false;
    switch (policy.trigger) {
      case CompactionPolicy::Trigger::off:
      case CompactionPolicy::Trigger::manual:
        return false;
      case CompactionPolicy::Trigger::every:
        return since_compaction >= policy.amount;
      case CompactionPolicy::Trigger::depth:
        return std::get<EvalState>(s).stack.complete_count() > policy.amount;
    }
    return false;
  };

  MachineState state = inject(t);
  track(state);
  for (;;) {
    if (due(state)) {
      MachineState compacted = compact(state);
      on_compact(std::as_const(state), std::as_const(compacted));
      state = std::move(compacted);
      since_compaction = 0;
      ++result.compactions;
    }
    if (is_final(state)) {
      result.answer = unload(state);
      return result;
    }
    if (result.steps == budget.max_steps) return result;
    std::optional<StepInfo> info;
    if (result.reductions == budget.max_reductions) {
      MachineState probe = state;
      info = advance(probe, options);
      if (info && is_reduction(info->rule)) return result;
      state = std::move(probe);
    } else {
      info = advance(state, options);
    }
    if (!info) return result;
    ++result.steps;
    ++since_compaction;
    if (is_reduction(info->rule)) ++result.reductions;
    track(state);
    observe(*info, std::as_const(state));
  }
}

inline CompactingResult eval_ckplus_compacting(const Term& t, MachineBudget budget,
                                               CompactionPolicy policy,
                                               const MachineOptions& options = {}) {
  return eval_ckplus_compacting(
      t, budget, policy, [](const StepInfo&, const MachineState&) {},
      [](const MachineState&, const MachineState&) {}, options);
}

}  // namespace cbneed

#endif  // CBNEED_SC_HPP
