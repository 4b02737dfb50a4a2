#ifndef CBNEED_HARNESS_HPP
#define CBNEED_HARNESS_HPP

// Verification plumbing shared by the CLI, the test suites and the acceptance
// runner: term corpora, a brute-force decomposition oracle, per-step audits of
// machine runs, differential runs, JSON-lines traces and the lookup benchmark.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cbneed/calculus.hpp"
#include "cbneed/ckplus.hpp"
#include "cbneed/renaming.hpp"
#include "cbneed/sc.hpp"
#include "cbneed/syntax.hpp"
#include "cbneed/term.hpp"

namespace cbneed::harness {

// ---------------------------------------------------------------------------
// Terms

namespace detail {

inline void enumerate_into(std::size_t size, Index depth, std::vector<Term>& out) {
  if (size == 0) return;
  if (size == 1) {
    for (Index n = 0; n < depth; ++n) out.push_back(Term::var(n));
    return;
  }
  std::vector<Term> bodies;
  enumerate_into(size - 1, depth + 1, bodies);
  for (auto& b : bodies) out.push_back(Term::lam(std::move(b)));
  for (std::size_t left = 1; left + 1 < size; ++left) {
    std::vector<Term> fs, as;
    enumerate_into(left, depth, fs);
    if (fs.empty()) continue;
    enumerate_into(size - 1 - left, depth, as);
    for (const auto& f : fs) {
      for (const auto& a : as) out.push_back(Term::app(f, a));
    }
  }
}

}  // namespace detail

/// Every term of exactly `size` nodes whose free indices are below `free`.
inline std::vector<Term> enumerate_terms(std::size_t size, Index free = 0) {
  std::vector<Term> out;
  detail::enumerate_into(size, free, out);
  return out;
}

/// Every closed term with 1..max_size nodes, smallest first.
inline std::vector<Term> enumerate_closed_upto(std::size_t max_size) {
  std::vector<Term> out;
  for (std::size_t s = 1; s <= max_size; ++s) detail::enumerate_into(s, 0, out);
  return out;
}

/// Random terms from a seeded 64-bit Mersenne twister.
class TermGenerator {
 public:
  explicit TermGenerator(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }

  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_);
  }

  /// A term of exactly `size` nodes whose free indices are below `free`.
  /// Applications of abstractions are favoured so that the binding rules
  /// get exercised.
  Term exact(std::size_t size, Index free) {
    if (!feasible(size, free)) throw std::invalid_argument("no term of that size and scope");
    return build(size, free);
  }

  /// A closed term of 2..max_size nodes (sizes uniform).
  Term closed(std::size_t max_size) {
    max_size = std::max<std::size_t>(max_size, 2);
    return build(2 + below(max_size - 1), 0);
  }

  /// A term of up to max_size nodes with free indices below `free`.
  Term open(std::size_t max_size, Index free) {
    std::size_t lo = free == 0 ? 2 : 1;
    max_size = std::max(max_size, lo);
    return build(lo + below(max_size - lo + 1), free);
  }

 private:
  static bool feasible(std::size_t size, Index depth) {
    return size >= 1 && (depth > 0 || size != 1);
  }

  Term build(std::size_t size, Index depth) {
    if (size == 1) return Term::var(below(depth));
    if (size == 2) return Term::lam(build(1, depth + 1));
    // Pick a split for an application, if one exists.
    std::vector<std::size_t> splits;
    for (std::size_t left = 1; left + 1 < size; ++left) {
      if (left == 1 && depth == 0) continue;
      if (size - 1 - left == 1 && depth == 0) continue;
      splits.push_back(left);
    }
    const auto roll = below(100);
    if (splits.empty() || roll < 25) return Term::lam(build(size - 1, depth + 1));
    const std::size_t left = splits[below(splits.size())];
    if (roll < 70 && left >= 2) {
      // (λ.M) N
      return Term::app(Term::lam(build(left - 1, depth + 1)), build(size - 1 - left, depth));
    }
    return Term::app(build(left, depth), build(size - 1 - left, depth));
  }

  std::mt19937_64 rng_;
};

/// A random environment of `length` slots with offsets in [0, max_offset].
inline RenamingEnv random_env(TermGenerator& g, std::size_t length, Offset max_offset) {
  std::vector<Offset> out(length);
  for (auto& o : out) o = static_cast<Offset>(g.below(static_cast<std::uint64_t>(max_offset) + 1));
  return RenamingEnv(std::move(out));
}

/// Church numeral n: λf.λx. f (f … x).
inline Term church(unsigned n) {
  Term body = Term::var(0);
  for (unsigned i = 0; i < n; ++i) body = Term::app(Term::var(1), std::move(body));
  return Term::lam(Term::lam(std::move(body)));
}

/// λm.λn.λf.λx. m f (n f x)
inline Term church_plus() {
  using namespace terms;
  return lam(lam(lam(lam(app(v(3), v(1), app(v(2), v(1), v(0)))))));
}

/// c_K I where c_1 = (λ.I) I and c_k = (λ.c_{k-1}) I: K nested bindings, none
/// of them used.
inline Term unused_chain(std::size_t k) {
  using namespace terms;
  Term c = app(lam(identity()), identity());
  for (std::size_t i = 1; i < k; ++i) c = app(lam(std::move(c)), identity());
  return app(std::move(c), identity());
}

/// Normal-order β-normalisation with a step cap; only for small test terms.
inline std::optional<Term> beta_normal_form(const Term& t, std::size_t fuel);

namespace detail {

inline Term subst_top(const Term& body, const Term& arg) {
  // body[0 := arg], with indices above 0 dropping by one.
  std::function<Term(const Term&, Index)> go = [&](const Term& u, Index d) -> Term {
    switch (u.kind()) {
      case TermKind::var:
        if (u.index() == d) return shift(arg, d, 0);
        if (u.index() > d) return Term::var(u.index() - 1);
        return u;
      case TermKind::lam:
        return Term::lam(go(u.body(), d + 1));
      case TermKind::app:
        return Term::app(go(u.fn(), d), go(u.arg(), d));
    }
    return u;
  };
  return go(body, 0);
}

inline std::optional<Term> normal_step(const Term& t) {
  switch (t.kind()) {
    case TermKind::var:
      return std::nullopt;
    case TermKind::lam:
      if (auto b = normal_step(t.body())) return Term::lam(std::move(*b));
      return std::nullopt;
    case TermKind::app:
      if (t.fn().is_lam()) return subst_top(t.fn().body(), t.arg());
      if (auto f = normal_step(t.fn())) return Term::app(std::move(*f), t.arg());
      if (auto a = normal_step(t.arg())) return Term::app(t.fn(), std::move(*a));
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

inline std::optional<Term> beta_normal_form(const Term& t, std::size_t fuel) {
  Term cur = t;
  for (std::size_t i = 0; i < fuel; ++i) {
    auto next = detail::normal_step(cur);
    if (!next) return cur;
    cur = std::move(*next);
  }
  return std::nullopt;
}

/// Erases bindings nobody refers to: (λ.B) M becomes B with its free indices
/// lowered, whenever 0 is not free in B. One bottom-up pass reaches the fixed
/// point.
inline Term normalize(const Term& t) {
  if (t.is_var()) return t;
  if (t.is_lam()) {
    Term b = normalize(t.body());
    return b.same_node(t.body()) ? t : Term::lam(std::move(b));
  }
  Term f = normalize(t.fn());
  Term a = normalize(t.arg());
  if (f.is_lam() && !occurs_free(f.body(), 0)) return unshift(f.body());
  if (f.same_node(t.fn()) && a.same_node(t.arg())) return t;
  return Term::app(std::move(f), std::move(a));
}

// ---------------------------------------------------------------------------
// normalize(unload(s)) without building unload(s)

/// 128-bit structural hash of a term.
struct Digest {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  friend bool operator==(const Digest&, const Digest&) = default;

  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }
  static Digest var(Index n) {
    return {mix(n * 0x9e3779b97f4a7c15ULL + 1), mix(n * 0xc2b2ae3d27d4eb4fULL + 2)};
  }
  static Digest lam(const Digest& d) {
    return {mix(d.a * 0xff51afd7ed558ccdULL + 3), mix(d.b * 0xc4ceb9fe1a85ec53ULL + 4)};
  }
  static Digest app(const Digest& f, const Digest& x) {
    return {mix(f.a * 0x2545f4914f6cdd1dULL ^ mix(x.a + 5)),
            mix(f.b * 0x9fb21c651e98df25ULL ^ mix(x.b + 6))};
  }
};

inline Digest digest(const Term& t) {
  switch (t.kind()) {
    case TermKind::var: return Digest::var(t.index());
    case TermKind::lam: {
      // Abstraction chains are walked without recursion.
      std::size_t depth = 0;
      Term b = t;
      while (b.is_lam()) {
        b = b.body();
        ++depth;
      }
      Digest d = digest(b);
      while (depth-- > 0) d = Digest::lam(d);
      return d;
    }
    case TermKind::app: return Digest::app(digest(t.fn()), digest(t.arg()));
  }
  return {};
}

namespace detail {
class NormalImage;
}

/// Scratch space for normal_image and normal_image_digest, meant to be reused
/// across the states of one run. Normalized frame arguments are memoized;
/// entries hold on to their keys, so the addresses used as keys stay unique.
class NormalImageCache {
 public:
  const Term& piece(const Term& t, const RenamingEnv& r) {
    if (r.empty() || t.is_closed()) {
      auto [it, fresh] = closed_.try_emplace(t.identity());
      if (fresh) it->second = {t, normalize(apply(r, t))};
      return it->second.second;
    }
    auto [it, fresh] = open_.try_emplace({t.identity(), r.identity()});
    if (fresh) it->second = {t, r, normalize(apply(r, t))};
    return std::get<2>(it->second);
  }

 private:
  friend class detail::NormalImage;

  struct PairHash {
    std::size_t operator()(const std::pair<const void*, const void*>& p) const {
      return std::hash<const void*>()(p.first) * 31 + std::hash<const void*>()(p.second);
    }
  };
  std::unordered_map<const void*, std::pair<Term, Term>> closed_;
  std::unordered_map<std::pair<const void*, const void*>, std::tuple<Term, RenamingEnv, Term>,
                     PairHash>
      open_;

  enum class Kind : std::uint8_t { arg, op, bind };
  struct Layer {
    Kind kind;
    bool dead = false;
    std::size_t outside = 0;      // bindings outside this layer
    const Term* piece = nullptr;  // normalized argument
    std::size_t nested = 0;       // spine of a demand frame's body
  };
  struct Spine {
    std::size_t first = 0;  // layers [first, last), innermost first
    std::size_t last = 0;
    std::size_t binds = 0;
    std::size_t flags = 0;  // offset of this spine's bindings in live / prefix
    std::size_t parent = 0;
    std::size_t at = 0;
    bool nested = false;
    bool bound = false;  // a nested spine refers to its demand frame's λ
    Term core;
  };
  std::vector<Layer> layers_;
  std::vector<Spine> spines_;
  std::vector<char> live_;
  std::vector<Index> prefix_;
  std::vector<std::size_t> prefix_at_;
  std::vector<std::optional<Term>> heads_;
  std::vector<std::vector<Layer>> pending_;
};

namespace detail {

// φ of a state is a spine of layers wrapped around the control term:
// arguments App([], N), demand frames App(λ.Ŝ[n], []) and bindings
// App(λ.[], M). Binding layers are numbered by the bindings outside them
// (their level). Walking the spine from the inside out decides which bindings
// normalize erases; a second walk assembles the result, either as a term or
// as its digest. Dead bindings are never turned into anything. A demand
// frame's saved stack is a nested spine whose indices are renumbered straight
// into the enclosing one, so each node of the result is produced once.
class NormalImage {
  using Cache = NormalImageCache;
  using Kind = Cache::Kind;
  using Layer = Cache::Layer;
  using Spine = Cache::Spine;

 public:
  NormalImage(const MachineState& state, Cache& cache) : c_(cache) {
    c_.layers_.clear();
    c_.spines_.clear();
    c_.live_.clear();
    c_.prefix_.clear();
    c_.spines_.emplace_back();
    if (const auto* e = std::get_if<EvalState>(&state)) {
      open_spine(0, e->stack.complete_count(), c_.piece(e->control, e->env));
      add_chain(0, e->stack.top, e->stack.below.size());
      for (std::size_t i = e->stack.below.size(); i-- > 0;) add_frame(0, e->stack.below[i], i);
    } else {
      const auto& s = std::get<SearchState>(state);
      open_spine(0, s.remaining.size() + s.answers.size(), c_.piece(s.value, s.env));
      const std::size_t base = s.remaining.size();
      for (std::size_t j = 0; j < s.answers.size(); ++j) {
        add_frame(0, s.answers[j], base + s.answers.size() - 1 - j);
      }
      for (std::size_t i = s.remaining.size(); i-- > 0;) add_frame(0, s.remaining[i], i);
    }
    close_spine(0);
  }

  Term term() {
    seal();
    return build<TermBuilder>(0);
  }
  Digest digest() {
    seal();
    return build<DigestBuilder>(0);
  }

 private:
  struct TermBuilder {
    using Value = Term;
    static Term var(Index n) { return Term::var(n); }
    static Term lam(Term b) { return Term::lam(std::move(b)); }
    static Term app(Term f, Term x) { return Term::app(std::move(f), std::move(x)); }
    static Term of(const Term& t) { return t; }
  };
  struct DigestBuilder {
    using Value = Digest;
    static Digest var(Index n) { return Digest::var(n); }
    static Digest lam(const Digest& b) { return Digest::lam(b); }
    static Digest app(const Digest& f, const Digest& x) { return Digest::app(f, x); }
    static Digest of(const Term& t) { return cbneed::harness::digest(t); }
  };

  // Pass one runs while the layers are collected, innermost first: a binding
  // is decided once everything inside it has been seen. Dead bindings are not
  // kept; pass two has nothing to do for them.
  void open_spine(std::size_t sp, std::size_t binds, Term core) {
    heads_.resize(c_.spines_.size());
    prefix_at_.resize(c_.spines_.size());
    Spine& s = c_.spines_[sp];
    s.binds = binds;
    s.core = std::move(core);
    s.flags = c_.live_.size();
    c_.live_.resize(c_.live_.size() + binds, 0);
    reference(sp, c_.spines_[sp].core, binds);
    // The innermost term stays an abstraction until a layer keeps something
    // around it; the head is that abstraction inside the core.
    heads_[sp].reset();
    if (c_.spines_[sp].core.is_lam()) heads_[sp] = c_.spines_[sp].core;
    c_.spines_[sp].first = c_.layers_.size();
  }

  void close_spine(std::size_t sp) {
    Spine& s = c_.spines_[sp];
    const std::size_t base = c_.prefix_.size();
    c_.prefix_.resize(base + s.binds + 1);
    c_.prefix_[base] = 0;
    for (std::size_t j = 0; j < s.binds; ++j) {
      c_.prefix_[base + j + 1] = c_.prefix_[base + j] + c_.live_[s.flags + j];
    }
    prefix_at_[sp] = base;
  }

  // Layers of one spine are contiguous: a nested spine is collected into
  // `pending_` first and appended after its parent finishes.
  void push(std::size_t sp, const Layer& l) { pending(sp).push_back(l); }

  std::vector<Layer>& pending(std::size_t sp) {
    if (pending_.size() <= sp) pending_.resize(sp + 1);
    return pending_[sp];
  }

  void add_chain(std::size_t sp, const PartialFrame& k, std::size_t outside) {
    for (const PartialFrame* f = &k; !f->is_mt(); f = &f->rest()) {
      if (f->is_arg()) {
        add_arg(sp, f->term(), f->env(), outside);
      } else {
        add_op(sp, f->saved(), outside);
      }
    }
  }

  void add_frame(std::size_t sp, const CompleteFrame& f, std::size_t level) {
    if (c_.live_[c_.spines_[sp].flags + level] != 0) {
      Layer l{Kind::bind};
      l.outside = level;
      l.piece = &c_.piece(f.arg, f.env);
      reference(sp, *l.piece, level);
      heads_[sp].reset();
      push(sp, l);
    }
    add_chain(sp, f.inner, level);
  }

  void add_arg(std::size_t sp, const Term& t, const RenamingEnv& r, std::size_t outside) {
    Layer l{Kind::arg};
    l.outside = outside;
    auto& head = heads_[sp];
    if (head && !occurs_free(head->body(), 0)) {
      l.dead = true;
      Term body = head->body();
      if (body.is_lam()) {
        head = std::move(body);
      } else {
        head.reset();
      }
    } else {
      l.piece = &c_.piece(t, r);
      reference(sp, *l.piece, outside);
      head.reset();
    }
    push(sp, l);
  }

  void add_op(std::size_t sp, const ContinuationStack& saved, std::size_t outside) {
    const std::size_t n = c_.spines_.size();
    c_.spines_.emplace_back();
    c_.spines_[n].nested = true;
    c_.spines_[n].parent = sp;
    c_.spines_[n].at = outside;
    open_spine(n, saved.complete_count(), Term::var(saved.size() - 1));
    add_chain(n, saved.top, saved.below.size());
    for (std::size_t i = saved.below.size(); i-- > 0;) add_frame(n, saved.below[i], i);
    close_spine(n);
    if (!c_.spines_[n].bound) throw std::logic_error("demand frame lost its variable");
    Layer l{Kind::op};
    l.outside = outside;
    l.nested = n;
    heads_[sp].reset();
    push(sp, l);
  }

  // Moves the collected layers into one flat array, spine by spine.
  void seal() {
    for (std::size_t sp = 0; sp < c_.spines_.size(); ++sp) {
      auto& p = pending(sp);
      c_.spines_[sp].first = c_.layers_.size();
      c_.layers_.insert(c_.layers_.end(), p.begin(), p.end());
      c_.spines_[sp].last = c_.layers_.size();
      p.clear();
    }
  }

  // A use of free index n of something under `outside` bindings of spine sp.
  // Index 0 past a nested spine is its demand frame's own λ; anything further
  // out belongs to the enclosing spine.
  void use(std::size_t sp, Index n, std::size_t outside) {
    for (;;) {
      Spine& s = c_.spines_[sp];
      if (n < outside) {
        c_.live_[s.flags + outside - 1 - n] = 1;
        return;
      }
      if (n == outside) {
        s.bound = true;
        return;
      }
      if (!s.nested) return;
      n = n - outside - 1;
      outside = s.at;
      sp = s.parent;
    }
  }

  void reference(std::size_t sp, const Term& t, std::size_t outside) {
    t.for_each_free([&](Index n) { use(sp, n, outside); });
  }

  Index prefix(std::size_t sp, std::size_t j) const { return c_.prefix_[prefix_at_[sp] + j]; }

  // Free index n of something under `outside` bindings of spine sp, counted
  // in live bindings only, as seen from the top of the whole result.
  Index renumber(std::size_t sp, Index n, std::size_t outside) const {
    Index out = 0;
    for (;;) {
      const Spine& s = c_.spines_[sp];
      if (n < outside) {
        const std::size_t target = outside - 1 - n;
        return out + prefix(sp, outside) - prefix(sp, target + 1);
      }
      const Index past = n - outside;
      if (!s.nested || past == 0) return out + prefix(sp, outside) + past;
      out += prefix(sp, outside) + 1;
      n = past - 1;
      outside = s.at;
      sp = s.parent;
    }
  }

  Term reindex(std::size_t sp, const Term& t, std::size_t outside, Index depth = 0) const {
    if (t.free_bound() <= depth) return t;
    switch (t.kind()) {
      case TermKind::var:
        return t.index() < depth ? t
                                 : Term::var(depth + renumber(sp, t.index() - depth, outside));
      case TermKind::lam:
        return Term::lam(reindex(sp, t.body(), outside, depth + 1));
      case TermKind::app:
        return Term::app(reindex(sp, t.fn(), outside, depth),
                         reindex(sp, t.arg(), outside, depth));
    }
    return t;
  }

  template <typename B>
  typename B::Value piece_value(std::size_t sp, const Term& t, std::size_t outside,
                                Index depth = 0) const {
    if constexpr (std::is_same_v<B, TermBuilder>) {
      return reindex(sp, t, outside, depth);
    } else {
      switch (t.kind()) {
        case TermKind::var:
          return B::var(t.index() < depth ? t.index()
                                          : depth + renumber(sp, t.index() - depth, outside));
        case TermKind::lam:
          return B::lam(piece_value<B>(sp, t.body(), outside, depth + 1));
        case TermKind::app:
          return B::app(piece_value<B>(sp, t.fn(), outside, depth),
                        piece_value<B>(sp, t.arg(), outside, depth));
      }
      return {};
    }
  }

  // Pass two. Dead arguments only ever strip abstractions off the core, so
  // the result stays a plain term until the first kept layer.
  template <typename B>
  typename B::Value build(std::size_t sp) {
    using V = typename B::Value;
    const Spine& s = c_.spines_[sp];
    std::optional<Term> t = reindex(sp, s.core, s.binds);
    V v{};
    auto current = [&]() -> V {
      if (t) {
        v = B::of(*t);
        t.reset();
      }
      return v;
    };
    for (std::size_t i = s.first; i < s.last; ++i) {
      const Layer& l = c_.layers_[i];
      switch (l.kind) {
        case Kind::bind:
          if (!l.dead) v = B::app(B::lam(current()), piece_value<B>(sp, *l.piece, l.outside));
          break;
        case Kind::arg:
          if (l.dead) {
            if (!t) throw std::logic_error("erased argument outside the control term");
            t = unshift(t->body());
          } else {
            v = B::app(current(), piece_value<B>(sp, *l.piece, l.outside));
          }
          break;
        case Kind::op: {
          V inner = B::lam(build<B>(l.nested));
          v = B::app(std::move(inner), current());
          break;
        }
      }
    }
    return current();
  }

  Cache& c_;
  std::vector<std::size_t>& prefix_at_ = c_.prefix_at_;
  std::vector<std::optional<Term>>& heads_ = c_.heads_;
  std::vector<std::vector<Layer>>& pending_ = c_.pending_;
};

}  // namespace detail

/// normalize(unload(s)), computed from the frames directly.
inline Term normal_image(const MachineState& s, NormalImageCache* cache = nullptr) {
  NormalImageCache local;
  return detail::NormalImage(s, cache != nullptr ? *cache : local).term();
}

/// digest(normal_image(s)) without building the term.
inline Digest normal_image_digest(const MachineState& s, NormalImageCache* cache = nullptr) {
  NormalImageCache local;
  return detail::NormalImage(s, cache != nullptr ? *cache : local).digest();
}

// ---------------------------------------------------------------------------
// Corpus

struct CorpusEntry {
  std::string name;
  Term term;
};

struct CorpusParams {
  std::uint64_t seed = 42;
  std::size_t max_size = 12;
  std::size_t count = 10000;
};

struct Corpus {
  CorpusParams params;
  std::vector<CorpusEntry> entries;
};

/// Fixed terms every corpus starts with.
inline std::vector<CorpusEntry> regression_terms() {
  using namespace terms;
  const Term i = identity();
  const Term k = lam(lam(v(1)));
  return {
      {"identity", i},
      {"deref", app(i, i)},
      {"answer", app(lam(i), i)},
      {"assoc-l", app(app(lam(i), i), i)},
      {"assoc-r", app(i, app(lam(i), i))},
      {"operator-redex", app(app(i, i), i)},
      {"self-apply-demand", app(lam(app(v(0), v(0))), app(i, i))},
      {"unused-outer", app(app(lam(k), i), i)},
      {"k-combinator", app(app(k, i), omega())},
      {"omega", omega()},
      {"chain-10", unused_chain(10)},
      {"chain-100", unused_chain(100)},
      {"church-2+2", app(church_plus(), church(2), church(2))},
      {"church-2+2-applied", app(app(church_plus(), church(2), church(2)), i, i)},
  };
}

/// Regression terms followed by `count` random closed terms.
inline Corpus gen_corpus(const CorpusParams& params, bool with_regressions = true) {
  Corpus c{params, {}};
  if (with_regressions) c.entries = regression_terms();
  TermGenerator g(params.seed);
  c.entries.reserve(c.entries.size() + params.count);
  for (std::size_t i = 0; i < params.count; ++i) {
    c.entries.push_back({"random-" + std::to_string(i), g.closed(params.max_size)});
  }
  return c;
}

inline std::vector<CorpusEntry> exhaustive_corpus(std::size_t max_size) {
  std::vector<CorpusEntry> out;
  std::size_t i = 0;
  for (auto& t : enumerate_closed_upto(max_size)) {
    out.push_back({"exhaustive-" + std::to_string(i++), std::move(t)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force decomposition

namespace detail {

struct Split {
  EvalContext context;
  Term subterm;
};

inline EvalContext prepend(ContextLayer layer, const EvalContext& e) {
  EvalContext out;
  out.layers.reserve(e.layers.size() + 1);
  out.layers.push_back(std::move(layer));
  out.layers.insert(out.layers.end(), e.layers.begin(), e.layers.end());
  return out;
}

// Every way of reading t as E[s], one entry per derivation.
inline std::vector<Split> all_splits(const Term& t) {
  std::vector<Split> out{{EvalContext::hole(), t}};
  if (!t.is_app()) return out;
  for (auto& s : all_splits(t.fn())) {
    out.push_back({prepend(AppL{t.arg()}, s.context), std::move(s.subterm)});
  }
  if (!t.fn().is_lam()) return out;
  const auto body_splits = all_splits(t.fn().body());
  for (const auto& s : body_splits) {
    out.push_back({prepend(BindBody{t.arg()}, s.context), s.subterm});
  }
  for (const auto& s : body_splits) {
    if (!s.subterm.is_var() || s.subterm.index() != delta(s.context)) continue;
    auto inner = std::make_shared<const EvalContext>(s.context);
    for (auto& a : all_splits(t.arg())) {
      out.push_back({prepend(BindArg{inner}, a.context), std::move(a.subterm)});
    }
  }
  return out;
}

inline std::vector<IsAnswer> all_answers(const Term& t) {
  if (t.is_lam()) return {IsAnswer{AnswerContext::hole(), t}};
  std::vector<IsAnswer> out;
  if (t.is_app() && t.fn().is_lam()) {
    for (auto& a : all_answers(t.fn().body())) {
      a.context.args.insert(a.context.args.begin(), t.arg());
      out.push_back(std::move(a));
    }
  }
  return out;
}

// Body contexts E with E[n], n = Δ(E).
inline std::vector<EvalContext> demanding_contexts(const Term& body) {
  std::vector<EvalContext> out;
  for (auto& s : all_splits(body)) {
    if (s.subterm.is_var() && s.subterm.index() == delta(s.context)) {
      out.push_back(std::move(s.context));
    }
  }
  return out;
}

inline std::vector<Redex> all_redexes(const Term& s) {
  std::vector<Redex> out;
  if (!s.is_app()) return out;
  const Term f = s.fn();
  const Term a = s.arg();
  if (f.is_lam() && a.is_lam()) {
    for (auto& e : demanding_contexts(f.body())) out.emplace_back(Deref{std::move(e), a});
  }
  if (f.is_app() && f.fn().is_lam()) {
    for (auto& ans : all_answers(f.fn().body())) {
      out.emplace_back(AssocL{std::move(ans.context), std::move(ans.value), f.arg(), a});
    }
  }
  if (f.is_lam() && a.is_app() && a.fn().is_lam()) {
    const auto answers = all_answers(a.fn().body());
    if (!answers.empty()) {
      for (auto& e : demanding_contexts(f.body())) {
        for (const auto& ans : answers) {
          out.emplace_back(AssocR{e, ans.context, ans.value, a.arg()});
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Every derivation of t as an answer or as E[redex], found by trying all
/// subterm positions against the context grammar. Used as an oracle for
/// `decompose`.
inline std::vector<Decomposition> decompose_all(const Term& t) {
  std::vector<Decomposition> out;
  for (auto& a : detail::all_answers(t)) out.emplace_back(std::move(a));
  for (auto& s : detail::all_splits(t)) {
    for (auto& r : detail::all_redexes(s.subterm)) {
      out.emplace_back(Decomposed{s.context, std::move(r)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Auditing machine runs

struct AuditOptions {
  bool simulation = false;
  bool well_formed = false;
  bool laziness = false;
  /// On every eval state: compact preserves meaning and is idempotent.
  bool compaction = false;
  std::size_t max_messages = 5;
};

struct AuditReport {
  EvalResult result;
  std::uint64_t states = 0;
  std::uint64_t simulation_violations = 0;
  std::uint64_t tagging_violations = 0;
  std::uint64_t well_formed_violations = 0;
  std::uint64_t laziness_violations = 0;
  std::uint64_t compaction_violations = 0;
  std::uint64_t idempotence_violations = 0;
  std::uint64_t compaction_checks = 0;
  std::vector<std::string> messages;

  std::uint64_t violations() const {
    return simulation_violations + tagging_violations + well_formed_violations +
           laziness_violations + compaction_violations + idempotence_violations;
  }
};

/// Outcome of one simulation check: φ unchanged, φ took exactly one
/// standard-reduction step, or neither.
enum class SimulationCheck : std::uint8_t { equal, reduction, violation };

inline std::string_view to_string(SimulationCheck c) {
  switch (c) {
    case SimulationCheck::equal: return "equal";
    case SimulationCheck::reduction: return "step";
    case SimulationCheck::violation: return "violation";
  }
  return "?";
}

inline SimulationCheck check_simulation(const Term& before, const Term& after) {
  if (before == after) return SimulationCheck::equal;
  auto next = step_need(before);
  if (next && *next == after) return SimulationCheck::reduction;
  return SimulationCheck::violation;
}

/// Runs the machine on `t`, checking the selected properties after every step.
inline AuditReport audit_run(const Term& t, MachineBudget budget, const AuditOptions& opts,
                             const MachineOptions& machine = {}) {
  AuditReport report;
  auto note = [&](std::string msg) {
    if (report.messages.size() < opts.max_messages) report.messages.push_back(std::move(msg));
  };
  std::optional<Term> phi;
  if (opts.simulation) phi = unload(inject(t));
  std::unordered_map<BindingId, std::uint64_t> forced;

  NormalImageCache pieces;
  auto check_compaction = [&](const MachineState& s) {
    const auto* e = std::get_if<EvalState>(&s);
    if (e == nullptr) return;
    ++report.compaction_checks;
    try {
      EvalState once = compact(*e);
      check_well_formed(once, EnvLength::unchecked);
      // Digests first; a differing pair is confirmed on the terms themselves.
      if (normal_image_digest(once, &pieces) != normal_image_digest(s, &pieces) &&
          normal_image(once, &pieces) != normal_image(s, &pieces)) {
        ++report.compaction_violations;
        note("compaction changed meaning of " + print(unload(s)));
      }
      if (!(compact(once) == once)) {
        ++report.idempotence_violations;
        note("compaction not idempotent on " + print(unload(s)));
      }
    } catch (const std::exception& ex) {
      ++report.compaction_violations;
      note(std::string("compaction failed: ") + ex.what());
    }
  };
  if (opts.compaction) check_compaction(inject(t));
  WellFormedTracker tracker;
  if (opts.well_formed) {
    try {
      tracker.reset(inject(t));
    } catch (const MalformedState& ex) {
      ++report.well_formed_violations;
      note(std::string("initial state: ") + ex.what());
    }
  }

  report.result = eval_ckplus(
      t, budget,
      [&](const StepInfo& info, const MachineState& s) {
        ++report.states;
        const std::string rule(rule_name(info.rule));
        if (opts.well_formed) {
          try {
            tracker.after(info, s);
          } catch (const MalformedState& ex) {
            ++report.well_formed_violations;
            note("after " + rule + ": " + ex.what());
          }
        }
        if (opts.laziness && info.rule == Rule::lookup_arg && !info.argument_is_value) {
          if (++forced[info.binding] > 1) {
            ++report.laziness_violations;
            note("binding " + std::to_string(info.binding) + " forced twice");
          }
        }
        if (opts.simulation) {
          Term now = unload(s);
          const auto c = check_simulation(*phi, now);
          if (c == SimulationCheck::violation) {
            ++report.simulation_violations;
            note("after " + rule + ": " + print(*phi) + "  =>  " + print(now));
          } else if ((c == SimulationCheck::reduction) != is_reduction(info.rule)) {
            ++report.tagging_violations;
            note(rule + " took the " + std::string(to_string(c)) + " branch");
          }
          phi = std::move(now);
        }
        if (opts.compaction) check_compaction(s);
      },
      machine);
  return report;
}

// ---------------------------------------------------------------------------
// Differential runs

enum class Outcome : std::uint8_t { agree_answer, agree_budget, mismatch };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::agree_answer: return "agree";
    case Outcome::agree_budget: return "agree-budget";
    case Outcome::mismatch: return "MISMATCH";
  }
  return "?";
}

struct DiffEntry {
  std::size_t index = 0;
  std::string name;
  Term term;
  Outcome outcome = Outcome::agree_answer;
  EvalResult need;
  EvalResult machine;
  std::string detail;
  /// With simulation checks on: per-step property violations.
  std::uint64_t violations = 0;
};

struct DiffOptions {
  /// Reduction cap for both evaluators.
  std::uint64_t budget = 10000;
  bool check_simulation = false;
  MachineOptions machine;
  unsigned jobs = 0;  // 0: hardware concurrency
};

struct DiffReport {
  std::vector<DiffEntry> entries;
  std::uint64_t mismatches = 0;
  std::uint64_t violations = 0;
  std::uint64_t answers = 0;
  std::uint64_t budget_exceeded = 0;
};

namespace detail {

inline std::string describe(const EvalResult& r) {
  return r.answer ? print(*r.answer) : std::string("BUDGET");
}

// Replays both evaluators reduction by reduction and reports the first place
// the machine's image leaves the standard-reduction sequence.
inline std::string first_divergence(const Term& t, std::uint64_t budget,
                                    const MachineOptions& machine) {
  Term expected = t;
  std::uint64_t n = 0;
  std::string found;
  MachineState state = inject(t);
  Term phi = unload(state);
  for (std::uint64_t steps = 0; found.empty() && !is_final(state) && n < budget; ++steps) {
    auto info = advance(state, machine);
    if (!info) break;
    Term now = unload(state);
    if (now == phi) continue;
    auto next = step_need(phi);
    if (!next || !(*next == now)) {
      found = "machine step " + std::to_string(steps + 1) + " (" + std::string(rule_name(info->rule)) +
              ") after " + std::to_string(n) + " reductions: expected " +
              (next ? print(*next) : std::string("an answer")) + ", got " + print(now);
    }
    phi = std::move(now);
    ++n;
  }
  return found.empty() ? std::string("no divergence within budget") : found;
}

}  // namespace detail

inline DiffEntry diff_one(std::size_t index, const CorpusEntry& e, const DiffOptions& opts) {
  DiffEntry out{index, e.name, e.term, Outcome::agree_answer, {}, {}, {}, 0};
  out.need = eval_need(e.term, opts.budget);
  const auto budget = MachineBudget::reductions(opts.budget);
  if (opts.check_simulation) {
    AuditOptions a;
    a.simulation = a.well_formed = a.laziness = true;
    auto report = audit_run(e.term, budget, a, opts.machine);
    out.machine = report.result;
    out.violations = report.violations();
    if (!report.messages.empty()) out.detail = report.messages.front();
  } else {
    out.machine = eval_ckplus(e.term, budget, opts.machine);
  }
  const bool same = out.need.budget_exceeded() == out.machine.budget_exceeded() &&
                    (!out.need.answer || *out.need.answer == *out.machine.answer);
  if (!same) {
    out.outcome = Outcome::mismatch;
    out.detail = "need: " + detail::describe(out.need) + "; ckplus: " +
                 detail::describe(out.machine) + "; first divergence: " +
                 detail::first_divergence(e.term, opts.budget, opts.machine);
  } else {
    out.outcome = out.need.answer ? Outcome::agree_answer : Outcome::agree_budget;
  }
  return out;
}

/// Runs both evaluators on every entry. Entries are spread over worker
/// threads; the report is ordered by entry index.
inline DiffReport run_diff(const std::vector<CorpusEntry>& corpus, const DiffOptions& opts) {
  DiffReport report;
  report.entries.resize(corpus.size());
  unsigned jobs = opts.jobs != 0 ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(corpus.size(), 1)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < corpus.size(); i = next++) {
      report.entries[i] = diff_one(i, corpus[i], opts);
    }
  };
  if (jobs <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : report.entries) {
    if (e.outcome == Outcome::mismatch) ++report.mismatches;
    if (e.outcome == Outcome::agree_answer) ++report.answers;
    if (e.outcome == Outcome::agree_budget) ++report.budget_exceeded;
    report.violations += e.violations;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Traces

using json = nlohmann::json;

inline constexpr int kTraceVersion = 1;

inline json env_json(const RenamingEnv& r) {
  json out = json::array();
  for (Offset o : r.offsets()) out.push_back(o);
  return out;
}

struct TraceOptions {
  bool phi = false;
  Syntax syntax = Syntax::debruijn;
};

inline json trace_header(const Term& t, std::string_view machine, const TraceOptions& opts,
                         const std::string& compaction = "off") {
  return json{{"trace", "cbneed"},
              {"version", kTraceVersion},
              {"machine", machine},
              {"program", print(t, opts.syntax)},
              {"syntax", opts.syntax == Syntax::debruijn ? "debruijn" : "named"},
              {"compact", compaction},
              {"phi", opts.phi}};
}

/// One record for a machine state reached by `rule`.
inline json state_record(std::uint64_t step, std::string_view rule, const MachineState& s,
                         const TraceOptions& opts) {
  json j;
  j["step"] = step;
  j["rule"] = rule;
  if (const auto* e = std::get_if<EvalState>(&s)) {
    j["mode"] = "eval";
    j["control"] = print(e->control, Syntax::debruijn);
    j["env"] = env_json(e->env);
  } else {
    const auto& x = std::get<SearchState>(s);
    j["mode"] = "search";
    j["control"] = print(x.value, Syntax::debruijn);
    j["env"] = env_json(x.env);
    j["answer_frames"] = x.answers.size();
  }
  const auto m = stack_metrics(s);
  j["stack_depth"] = m.depth;
  j["binds"] = m.bind_count;
  if (opts.phi) j["phi"] = print(unload(s), opts.syntax);
  return j;
}

/// Replays a JSON-lines trace against a fresh machine run. Returns the number
/// of records checked; throws std::runtime_error at the first disagreement.
inline std::uint64_t verify_trace(const std::vector<std::string>& lines) {
  if (lines.empty()) throw std::runtime_error("empty trace");
  const json header = json::parse(lines.front());
  if (header.value("trace", "") != "cbneed" || header.value("version", 0) != kTraceVersion) {
    throw std::runtime_error("not a version " + std::to_string(kTraceVersion) + " cbneed trace");
  }
  if (header.value("machine", "") != "ckplus") {
    throw std::runtime_error("only ckplus traces can be replayed");
  }
  const Syntax syntax = header.value("syntax", "debruijn") == "named" ? Syntax::named : Syntax::debruijn;
  TraceOptions opts{header.value("phi", false), syntax};
  MachineState state = inject(parse(header.at("program").get<std::string>(), syntax));
  std::uint64_t checked = 0;
  auto fail = [](std::uint64_t line, const std::string& why) {
    throw std::runtime_error("trace line " + std::to_string(line) + ": " + why);
  };
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const json rec = json::parse(lines[i]);
    const std::string rule = rec.at("rule").get<std::string>();
    if (rule == "final" || rule == "budget") {
      if ((rule == "final") != is_final(state)) fail(i + 1, "final marker disagrees with state");
      continue;
    }
    if (rule == "inject") {
      // nothing to apply
    } else if (rule == "sc") {
      state = compact(state);
    } else {
      const auto expected = rule_from_name(rule);
      if (!expected) fail(i + 1, "unknown rule " + rule);
      auto info = advance(state);
      if (!info) fail(i + 1, "no transition applies");
      if (info->rule != *expected) {
        fail(i + 1, "recorded " + rule + " but the machine took " + std::string(rule_name(info->rule)));
      }
    }
    json mine = state_record(rec.at("step").get<std::uint64_t>(), rule, state, opts);
    for (const char* key : {"mode", "control", "env", "stack_depth", "binds", "phi"}) {
      if (rec.contains(key) && mine.contains(key) && rec[key] != mine[key]) {
        fail(i + 1, std::string("field ") + key + " differs: recorded " + rec[key].dump() +
                        ", replayed " + mine[key].dump());
      }
    }
    ++checked;
  }
  return checked;
}

// ---------------------------------------------------------------------------
// Lookup benchmark

struct BenchRow {
  std::size_t depth = 0;
  double ns_per_lookup = 0;
  std::size_t reps = 0;
};

namespace detail {

// A continuation as a singly linked chain, searched frame by frame.
struct LinkedFrame {
  CompleteFrame frame;
  std::unique_ptr<LinkedFrame> next;
};

template <typename T>
inline void keep(const T& value) {
  asm volatile("" : : "g"(&value) : "memory");
}

}  // namespace detail

/// A state ⟨n, R, ⟨mt, K₀ … K_{d−1}⟩⟩ whose control reaches the bottom bind.
inline EvalState lookup_state(std::size_t depth) {
  using namespace terms;
  std::vector<CompleteFrame> below;
  below.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    below.push_back(CompleteFrame{identity(), RenamingEnv(std::vector<Offset>(i, 0)),
                                  PartialFrame::mt(), fresh_binding_id()});
  }
  return EvalState{v(depth - 1), RenamingEnv(std::vector<Offset>(depth, 0)),
                   ContinuationStack{PartialFrame::mt(), std::move(below)}};
}

/// Median time to locate the bind frame of the control variable, either by
/// index arithmetic on the stack or by walking a linked chain of frames.
inline BenchRow bench_lookup(std::size_t depth, std::size_t reps, bool linear_scan) {
  if (depth == 0) throw std::invalid_argument("lookup depth must be at least 1");
  const EvalState s = lookup_state(depth);
  std::unique_ptr<detail::LinkedFrame> chain;
  for (const auto& f : s.stack.below) {
    chain = std::make_unique<detail::LinkedFrame>(detail::LinkedFrame{f, std::move(chain)});
  }
  using clock = std::chrono::steady_clock;
  std::vector<double> samples;
  samples.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = clock::now();
    const Index distance = effective_index(s.env, s.control.index());
    const CompleteFrame* found = nullptr;
    if (linear_scan) {
      const detail::LinkedFrame* f = chain.get();
      for (Index i = 0; i < distance && f != nullptr; ++i) f = f->next.get();
      found = f != nullptr ? &f->frame : nullptr;
    } else {
      found = &s.stack.complete(distance);
    }
    detail::keep(found);
    const auto t1 = clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  // Tear the chain down iteratively.
  while (chain) chain = std::move(chain->next);
  auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  return BenchRow{depth, *mid, reps};
}

}  // namespace cbneed::harness

#endif  // CBNEED_HARNESS_HPP
