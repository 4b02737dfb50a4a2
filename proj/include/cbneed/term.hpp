#ifndef CBNEED_TERM_HPP
#define CBNEED_TERM_HPP

// Nameless (de Bruijn) lambda terms.
//
// Terms are immutable and reference counted, so sharing subterms between
// machine states, traces and threads is free. Every node caches its size and
// a bound on its free indices, which lets shifting skip closed subterms.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cbneed {

using Index = std::uint64_t;

/// Raised when index arithmetic would leave the range of Index.
class IndexOverflow : public std::overflow_error {
 public:
  explicit IndexOverflow(const std::string& what) : std::overflow_error(what) {}
};

inline Index checked_add(Index a, Index b) {
  if (a > std::numeric_limits<Index>::max() - b) {
    throw IndexOverflow("de Bruijn index overflow");
  }
  return a + b;
}

enum class TermKind : std::uint8_t { var, lam, app };

class Term {
 public:
  /// A default-constructed Term is the variable 0; real code always uses
  /// the named constructors below.
  Term() : Term(var(0)) {}

  static Term var(Index n) {
    static const auto small = [] {
      std::vector<std::shared_ptr<const Node>> out;
      for (Index i = 0; i < kSharedVars; ++i) {
        out.push_back(std::make_shared<Node>(TermKind::var, i, nullptr, nullptr, 1, i + 1));
      }
      return out;
    }();
    if (n < kSharedVars) return Term(small[n]);
    return Term(std::make_shared<Node>(TermKind::var, n, nullptr, nullptr, 1,
                                             checked_add(n, 1)));
  }

  static Term lam(Term body) {
    const Index fb = body.free_bound() == 0 ? 0 : body.free_bound() - 1;
    const std::size_t size = body.size() + 1;
    return Term(std::make_shared<Node>(TermKind::lam, 0, std::move(body.node_), nullptr,
                                             size, fb));
  }

  static Term app(Term fn, Term arg) {
    const Index fb = std::max(fn.free_bound(), arg.free_bound());
    const std::size_t size = fn.size() + arg.size() + 1;
    return Term(std::make_shared<Node>(TermKind::app, 0, std::move(fn.node_),
                                             std::move(arg.node_), size, fb));
  }

  TermKind kind() const { return node_->kind; }
  bool is_var() const { return kind() == TermKind::var; }
  bool is_lam() const { return kind() == TermKind::lam; }
  bool is_app() const { return kind() == TermKind::app; }
  /// Values are exactly the abstractions.
  bool is_value() const { return is_lam(); }

  Index index() const { return node_->index; }
  Term body() const { return Term(node_->left); }
  Term fn() const { return Term(node_->left); }
  Term arg() const { return Term(node_->right); }

  /// Node count: variables, abstractions and applications each count one.
  std::size_t size() const { return node_->size; }

  /// One more than the largest free index, or 0 for closed terms.
  Index free_bound() const { return node_->free_bound; }
  bool is_closed() const { return free_bound() == 0; }

  bool same_node(const Term& other) const { return node_ == other.node_; }
  /// Stable while any copy of this term is alive.
  const void* identity() const { return node_.get(); }

  /// Calls f(n) once per free occurrence, n relative to the top. Closed
  /// subterms are skipped without being visited.
  template <typename F>
  void for_each_free(F&& f) const {
    visit_free(node_.get(), 0, f);
  }

  friend bool operator==(const Term& a, const Term& b) {
    std::vector<std::pair<const Node*, const Node*>> work{{a.node_.get(), b.node_.get()}};
    while (!work.empty()) {
      auto [x, y] = work.back();
      work.pop_back();
      if (x == y) continue;
      if (x->kind != y->kind || x->size != y->size || x->free_bound != y->free_bound) {
        return false;
      }
      switch (x->kind) {
        case TermKind::var:
          if (x->index != y->index) return false;
          break;
        case TermKind::lam:
          work.emplace_back(x->left.get(), y->left.get());
          break;
        case TermKind::app:
          work.emplace_back(x->left.get(), y->left.get());
          work.emplace_back(x->right.get(), y->right.get());
          break;
      }
    }
    return true;
  }
  friend bool operator!=(const Term& a, const Term& b) { return !(a == b); }

 private:
  static constexpr Index kSharedVars = 256;

  struct Node {
    Node(TermKind k, Index i, std::shared_ptr<const Node> l, std::shared_ptr<const Node> r,
         std::size_t s, Index fb)
        : kind(k), index(i), left(std::move(l)), right(std::move(r)), size(s), free_bound(fb) {}

    // Long chains (deep bindings built up by a divergent run) would otherwise
    // recurse once per level on destruction.
    // Small subtrees are shallow and go the ordinary way.
    ~Node() {
      if ((!left || left->size < kShallow) && (!right || right->size < kShallow)) return;
      std::vector<std::shared_ptr<const Node>> pending;
      auto release = [&pending](std::shared_ptr<const Node>& p) {
        if (p && p->size >= kShallow && p.use_count() == 1) pending.push_back(std::move(p));
      };
      release(left);
      release(right);
      while (!pending.empty()) {
        auto p = std::move(pending.back());
        pending.pop_back();
        auto& n = const_cast<Node&>(*p);
        release(n.left);
        release(n.right);
      }
    }

    static constexpr std::size_t kShallow = 4096;

    TermKind kind;
    Index index;
    std::shared_ptr<const Node> left;
    std::shared_ptr<const Node> right;
    std::size_t size;
    Index free_bound;
  };

  explicit Term(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  template <typename F>
  static void visit_free(const Node* n, Index depth, F& f) {
    while (n->free_bound > depth) {
      switch (n->kind) {
        case TermKind::var:
          f(n->index - depth);
          return;
        case TermKind::lam:
          n = n->left.get();
          ++depth;
          break;
        case TermKind::app:
          visit_free(n->left.get(), depth, f);
          n = n->right.get();
          break;
      }
    }
  }

  std::shared_ptr<const Node> node_;
};

/// Increments every free index of `t` by `x`, where "free" means `n >= m`
/// with `m` counted up under each binder.
inline Term shift(const Term& t, Index x, Index m = 0) {
  if (x == 0 || t.free_bound() <= m) return t;
  switch (t.kind()) {
    case TermKind::var:
      return t.index() >= m ? Term::var(checked_add(t.index(), x)) : t;
    case TermKind::lam:
      return Term::lam(shift(t.body(), x, m + 1));
    case TermKind::app:
      return Term::app(shift(t.fn(), x, m), shift(t.arg(), x, m));
  }
  return t;
}

/// Decrements every index `n > m` (counted up under binders) by one. The
/// caller guarantees that index `m` itself does not occur free.
inline Term unshift(const Term& t, Index m = 0) {
  if (t.free_bound() <= m + 1) return t;
  switch (t.kind()) {
    case TermKind::var:
      if (t.index() == m) throw std::logic_error("unshift: removed index occurs in term");
      return t.index() > m ? Term::var(t.index() - 1) : t;
    case TermKind::lam:
      return Term::lam(unshift(t.body(), m + 1));
    case TermKind::app:
      return Term::app(unshift(t.fn(), m), unshift(t.arg(), m));
  }
  return t;
}

/// Indices free at the top of `t`.
inline std::set<Index> free_indices(const Term& t) {
  std::set<Index> out;
  t.for_each_free([&out](Index n) { out.insert(n); });
  return out;
}

/// Does index `n` (relative to the top of `t`) occur free in `t`?
inline bool occurs_free(const Term& t, Index n) {
  if (t.free_bound() <= n) return false;
  switch (t.kind()) {
    case TermKind::var:
      return t.index() == n;
    case TermKind::lam:
      return occurs_free(t.body(), n + 1);
    case TermKind::app:
      return occurs_free(t.fn(), n) || occurs_free(t.arg(), n);
  }
  return false;
}

namespace terms {

inline Term v(Index n) { return Term::var(n); }
inline Term lam(Term body) { return Term::lam(std::move(body)); }
inline Term app(Term f, Term a) { return Term::app(std::move(f), std::move(a)); }
inline Term app(Term f, Term a, Term b) { return app(app(std::move(f), std::move(a)), std::move(b)); }

/// λ.0
inline Term identity() { return lam(v(0)); }
/// (λ.0 0)(λ.0 0)
inline Term omega() {
  auto w = lam(app(v(0), v(0)));
  return app(w, w);
}

}  // namespace terms

}  // namespace cbneed

#endif  // CBNEED_TERM_HPP
