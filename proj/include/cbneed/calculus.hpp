#ifndef CBNEED_CALCULUS_HPP
#define CBNEED_CALCULUS_HPP

// The by-need calculus on nameless terms: evaluation and answer contexts,
// the deref / assoc-L / assoc-R notions of reduction, unique decomposition,
// and the standard-reduction evaluator used as the reference semantics.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "cbneed/term.hpp"

namespace cbneed {

/// Raised when a program that should be closed is not.
class OpenTerm : public std::invalid_argument {
 public:
  OpenTerm() : std::invalid_argument("program is not closed") {}
};

inline void require_closed(const Term& t) {
  if (!t.is_closed()) throw OpenTerm();
}

struct EvalContext;

/// `E M`
struct AppL {
  Term arg;
  friend bool operator==(const AppL&, const AppL&) = default;
};
/// `(λ.E) M`
struct BindBody {
  Term arg;
  friend bool operator==(const BindBody&, const BindBody&) = default;
};
/// `(λ.E'[n]) E` with n = Δ(E'); only E' is stored here, E continues inward.
struct BindArg {
  std::shared_ptr<const EvalContext> body;
  friend bool operator==(const BindArg& a, const BindArg& b);
};

using ContextLayer = std::variant<AppL, BindBody, BindArg>;

/// An evaluation context as the list of its layers, outermost first. The
/// empty list is the hole.
struct EvalContext {
  std::vector<ContextLayer> layers;

  static EvalContext hole() { return {}; }
  bool is_hole() const { return layers.empty(); }
  friend bool operator==(const EvalContext&, const EvalContext&) = default;
};

inline bool operator==(const BindArg& a, const BindArg& b) { return *a.body == *b.body; }

/// `A ::= [] | (λ.A) M`, stored as the arguments M, outermost first.
struct AnswerContext {
  std::vector<Term> args;

  static AnswerContext hole() { return {}; }
  friend bool operator==(const AnswerContext&, const AnswerContext&) = default;
};

/// The embedding of answer contexts into evaluation contexts.
inline EvalContext to_eval_context(const AnswerContext& a) {
  EvalContext e;
  e.layers.reserve(a.args.size());
  for (const auto& m : a.args) e.layers.emplace_back(BindBody{m});
  return e;
}

/// Number of binders between the hole and the top of the context (Δ).
inline Index delta(const EvalContext& e) {
  Index n = 0;
  for (const auto& layer : e.layers) {
    if (std::holds_alternative<BindBody>(layer)) ++n;
  }
  return n;
}

inline Index delta(const AnswerContext& a) { return a.args.size(); }

inline Term plug(const EvalContext& e, Term t) {
  for (auto it = e.layers.rbegin(); it != e.layers.rend(); ++it) {
    if (const auto* l = std::get_if<AppL>(&*it)) {
      t = Term::app(std::move(t), l->arg);
    } else if (const auto* b = std::get_if<BindBody>(&*it)) {
      t = Term::app(Term::lam(std::move(t)), b->arg);
    } else {
      const auto& body = *std::get<BindArg>(*it).body;
      t = Term::app(Term::lam(plug(body, Term::var(delta(body)))), std::move(t));
    }
  }
  return t;
}

inline Term plug(const AnswerContext& a, Term t) {
  for (auto it = a.args.rbegin(); it != a.args.rend(); ++it) {
    t = Term::app(Term::lam(std::move(t)), *it);
  }
  return t;
}

/// `(λ.E[n]) V` with n = Δ(E).
struct Deref {
  EvalContext body;
  Term value;
  friend bool operator==(const Deref&, const Deref&) = default;
};
/// `((λ.A[V]) M) N`
struct AssocL {
  AnswerContext answer;
  Term value;
  Term bound;
  Term operand;
  friend bool operator==(const AssocL&, const AssocL&) = default;
};
/// `(λ.E[n]) ((λ.A[V]) M)` with n = Δ(E).
struct AssocR {
  EvalContext body;
  AnswerContext answer;
  Term value;
  Term bound;
  friend bool operator==(const AssocR&, const AssocR&) = default;
};

using Redex = std::variant<Deref, AssocL, AssocR>;

/// The term a redex stands for.
inline Term redex_term(const Redex& r) {
  if (const auto* d = std::get_if<Deref>(&r)) {
    return Term::app(Term::lam(plug(d->body, Term::var(delta(d->body)))), d->value);
  }
  if (const auto* l = std::get_if<AssocL>(&r)) {
    return Term::app(Term::app(Term::lam(plug(l->answer, l->value)), l->bound), l->operand);
  }
  const auto& a = std::get<AssocR>(r);
  return Term::app(Term::lam(plug(a.body, Term::var(delta(a.body)))),
                   Term::app(Term::lam(plug(a.answer, a.value)), a.bound));
}

/// Applies the matching notion of reduction, with index adjustment.
inline Term contract(const Redex& r) {
  if (const auto* d = std::get_if<Deref>(&r)) {
    const Index lift = checked_add(delta(d->body), 1);
    return Term::app(Term::lam(plug(d->body, shift(d->value, lift, 0))), d->value);
  }
  if (const auto* l = std::get_if<AssocL>(&r)) {
    const Index lift = checked_add(delta(l->answer), 1);
    Term inner = Term::app(l->value, shift(l->operand, lift, 0));
    return Term::app(Term::lam(plug(l->answer, std::move(inner))), l->bound);
  }
  const auto& a = std::get<AssocR>(r);
  const Index lift = checked_add(delta(a.answer), 1);
  Term demander = Term::lam(plug(a.body, Term::var(delta(a.body))));
  Term inner = Term::app(shift(demander, lift, 0), a.value);
  return Term::app(Term::lam(plug(a.answer, std::move(inner))), a.bound);
}

struct IsAnswer {
  AnswerContext context;
  Term value;
  friend bool operator==(const IsAnswer&, const IsAnswer&) = default;
};
struct Decomposed {
  EvalContext context;
  Redex redex;
  friend bool operator==(const Decomposed&, const Decomposed&) = default;
};
using Decomposition = std::variant<IsAnswer, Decomposed>;

inline Term plug(const Decomposition& d) {
  if (const auto* a = std::get_if<IsAnswer>(&d)) return plug(a->context, a->value);
  const auto& x = std::get<Decomposed>(d);
  return plug(x.context, redex_term(x.redex));
}

namespace detail {

// Partial result of the leftmost-outermost search. Contexts are accumulated
// innermost layer first while the recursion unwinds and reversed once at the
// top.
struct Search {
  enum class Kind { answer, redex, demand };
  Kind kind = Kind::answer;
  std::vector<Term> answer_args;    // answer: innermost first
  Term value;                       // answer
  std::vector<ContextLayer> layers; // redex, demand: innermost first
  std::optional<Redex> redex;       // redex
  Index var = 0;                    // demand: index at the hole
  Index depth = 0;                  // demand: Δ of the layers so far
};

inline EvalContext finish_context(std::vector<ContextLayer> innermost_first) {
  EvalContext e;
  e.layers.assign(std::make_move_iterator(innermost_first.rbegin()),
                  std::make_move_iterator(innermost_first.rend()));
  return e;
}

inline AnswerContext finish_answer(std::vector<Term> innermost_first) {
  AnswerContext a;
  a.args.assign(std::make_move_iterator(innermost_first.rbegin()),
                std::make_move_iterator(innermost_first.rend()));
  return a;
}

inline Search search(const Term& t) {
  Search s;
  switch (t.kind()) {
    case TermKind::var:
      s.kind = Search::Kind::demand;
      s.var = t.index();
      return s;
    case TermKind::lam:
      s.value = t;
      return s;
    case TermKind::app:
      break;
  }

  const Term f = t.fn();
  const Term a = t.arg();
  s = search(f);
  if (s.kind != Search::Kind::answer) {
    s.layers.emplace_back(AppL{a});
    return s;
  }
  if (!s.answer_args.empty()) {
    // ((λ.A[V]) M) N
    Term bound = std::move(s.answer_args.back());
    s.answer_args.pop_back();
    Search r;
    r.kind = Search::Kind::redex;
    r.redex = AssocL{finish_answer(std::move(s.answer_args)), std::move(s.value),
                     std::move(bound), a};
    return r;
  }

  // (λ.B) M: look for demand inside B first.
  Search b = search(f.body());
  switch (b.kind) {
    case Search::Kind::redex:
      b.layers.emplace_back(BindBody{a});
      return b;
    case Search::Kind::answer:
      b.answer_args.push_back(a);
      return b;
    case Search::Kind::demand:
      break;
  }
  if (b.var != b.depth) {
    b.layers.emplace_back(BindBody{a});
    ++b.depth;
    return b;
  }

  // The binder of this application is demanded; the argument takes over.
  auto body = std::make_shared<const EvalContext>(finish_context(std::move(b.layers)));
  Search r = search(a);
  if (r.kind == Search::Kind::answer) {
    Search out;
    out.kind = Search::Kind::redex;
    if (r.answer_args.empty()) {
      out.redex = Deref{*body, std::move(r.value)};
    } else {
      Term bound = std::move(r.answer_args.back());
      r.answer_args.pop_back();
      out.redex = AssocR{*body, finish_answer(std::move(r.answer_args)), std::move(r.value),
                         std::move(bound)};
    }
    return out;
  }
  r.layers.emplace_back(BindArg{std::move(body)});
  return r;
}

}  // namespace detail

/// Splits a closed term into an answer, or an evaluation context and the
/// redex in its hole. Throws std::logic_error if the term is stuck on a free
/// variable, which cannot happen for closed input.
inline Decomposition decompose(const Term& t) {
  detail::Search s = detail::search(t);
  switch (s.kind) {
    case detail::Search::Kind::answer:
      return IsAnswer{detail::finish_answer(std::move(s.answer_args)), std::move(s.value)};
    case detail::Search::Kind::redex:
      return Decomposed{detail::finish_context(std::move(s.layers)), std::move(*s.redex)};
    case detail::Search::Kind::demand:
      break;
  }
  throw std::logic_error("decompose: stuck on free variable " + std::to_string(s.var - s.depth));
}

inline bool is_answer(const Term& t) {
  Term u = t;
  while (u.is_app() && u.fn().is_lam()) u = u.fn().body();
  return u.is_lam();
}

/// One standard-reduction step; nullopt when the term is already an answer.
inline std::optional<Term> step_need(const Term& t) {
  Decomposition d = decompose(t);
  if (std::holds_alternative<IsAnswer>(d)) return std::nullopt;
  auto& x = std::get<Decomposed>(d);
  return plug(x.context, contract(x.redex));
}

/// Result of running an evaluator under a step budget. `answer` is empty iff
/// the budget ran out.
struct EvalResult {
  std::optional<Term> answer;
  std::uint64_t reductions = 0;
  std::uint64_t steps = 0;

  bool budget_exceeded() const { return !answer.has_value(); }
};

/// Iterates step_need from `t`, performing at most `budget` reductions. Each
/// step searches from the root, so this costs O(depth) per step; kept as the
/// literal reading for cross-checking `eval_need`.
inline EvalResult eval_need_stepwise(const Term& t, std::uint64_t budget) {
  require_closed(t);
  EvalResult result;
  Term current = t;
  for (;;) {
    Decomposition d = decompose(current);
    if (std::holds_alternative<IsAnswer>(d)) {
      result.answer = std::move(current);
      return result;
    }
    if (result.reductions == budget) return result;
    auto& x = std::get<Decomposed>(d);
    current = plug(x.context, contract(x.redex));
    ++result.reductions;
    result.steps = result.reductions;
  }
}

namespace detail {

// Standard reduction without re-searching from the root: after contracting
// E[r] the search resumes at the hole of E, which finds the same redex as
// decomposing E[r'] afresh because every layer of E is one the search would
// have entered anyway. Iterative, so deep terms do not exhaust the stack.
class Refocuser {
 public:
  explicit Refocuser(Term t) : focus_(std::move(t)) {}

  // Runs the search from the current focus. Returns true with `context` and
  // `redex` set, or false with `focus_` holding the whole answer.
  bool next(std::vector<ContextLayer>& context, std::optional<Redex>& redex) {
    for (;;) {
      // Descend along operators.
      while (focus_.is_app()) {
        layers_.emplace_back(AppL{focus_.arg()});
        focus_ = focus_.fn();
      }
      if (focus_.is_lam()) {
        if (answer(redex)) {
          context = std::move(layers_);
          return true;
        }
        if (done_) return false;
      } else {
        demand(focus_.index());
      }
    }
  }

  void resume(std::vector<ContextLayer> context, Term contractum) {
    layers_ = std::move(context);
    focus_ = std::move(contractum);
  }

  const Term& answer_term() const { return focus_; }

 private:
  // Unwinds an answer A[V] with V = focus_. Returns true on a redex; otherwise
  // either continues the search (focus_ moved into a body) or sets done_.
  bool answer(std::optional<Redex>& redex) {
    std::vector<Term> args;  // innermost first
    const Term value = focus_;
    while (!layers_.empty()) {
      ContextLayer layer = std::move(layers_.back());
      layers_.pop_back();
      if (auto* b = std::get_if<BindBody>(&layer)) {
        args.push_back(std::move(b->arg));
        continue;
      }
      if (auto* l = std::get_if<AppL>(&layer)) {
        if (args.empty()) {
          layers_.emplace_back(BindBody{std::move(l->arg)});
          focus_ = value.body();
          return false;
        }
        Term bound = std::move(args.back());
        args.pop_back();
        redex = AssocL{finish_answer(std::move(args)), value, std::move(bound), std::move(l->arg)};
        return true;
      }
      const auto& body = *std::get<BindArg>(layer).body;
      if (args.empty()) {
        redex = Deref{body, value};
      } else {
        Term bound = std::move(args.back());
        args.pop_back();
        redex = AssocR{body, finish_answer(std::move(args)), value, std::move(bound)};
      }
      return true;
    }
    AnswerContext a = finish_answer(std::move(args));
    focus_ = plug(a, value);
    done_ = true;
    return false;
  }

  // Unwinds a demand for variable n until its binder, then searches the
  // binder's argument.
  void demand(Index n) {
    std::vector<ContextLayer> inner;  // innermost first
    Index depth = 0;
    while (!layers_.empty()) {
      ContextLayer layer = std::move(layers_.back());
      layers_.pop_back();
      if (auto* b = std::get_if<BindBody>(&layer)) {
        if (n == depth) {
          Term arg = std::move(b->arg);
          auto body = std::make_shared<const EvalContext>(finish_context(std::move(inner)));
          layers_.emplace_back(BindArg{std::move(body)});
          focus_ = std::move(arg);
          return;
        }
        ++depth;
      }
      inner.push_back(std::move(layer));
    }
    throw std::logic_error("decompose: stuck on free variable " + std::to_string(n - depth));
  }

  std::vector<ContextLayer> layers_;  // outermost first
  Term focus_;
  bool done_ = false;
};

}  // namespace detail

/// Standard reduction from `t` for at most `budget` reductions. Produces the
/// same reduction sequence as iterating step_need.
inline EvalResult eval_need(const Term& t, std::uint64_t budget) {
  require_closed(t);
  EvalResult result;
  detail::Refocuser r(t);
  std::vector<ContextLayer> context;
  std::optional<Redex> redex;
  for (;;) {
    if (!r.next(context, redex)) {
      result.answer = r.answer_term();
      return result;
    }
    if (result.reductions == budget) return result;
    r.resume(std::move(context), contract(*redex));
    context = {};
    ++result.reductions;
    result.steps = result.reductions;
  }
}

}  // namespace cbneed

#endif  // CBNEED_CALCULUS_HPP
