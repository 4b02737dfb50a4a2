#ifndef CBNEED_RENAMING_HPP
#define CBNEED_RENAMING_HPP

// Renaming environments: one offset per enclosing bind, slot n holding the
// delayed adjustment for variable n. The effective index of n is n + R(n).
//
// Offsets are signed. The machine itself only ever raises them, but stack
// compaction can remove a bind that sits between a variable and its binding,
// which needs n + R(n) < n. Effective indices never go below zero.

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbneed/term.hpp"

namespace cbneed {

/// A machine state (or a piece of one) violates the machine invariants.
class MalformedState : public std::logic_error {
 public:
  explicit MalformedState(const std::string& what) : std::logic_error(what) {}
};

using Offset = std::int64_t;

class RenamingEnv {
 public:
  RenamingEnv() = default;
  RenamingEnv(std::initializer_list<Offset> offsets)
      : offsets_(offsets.size() == 0 ? nullptr
                                     : std::make_shared<const std::vector<Offset>>(offsets)) {}
  explicit RenamingEnv(std::vector<Offset> offsets)
      : offsets_(offsets.empty() ? nullptr
                                 : std::make_shared<const std::vector<Offset>>(std::move(offsets))) {}

  std::size_t size() const { return offsets_ ? offsets_->size() : 0; }
  bool empty() const { return size() == 0; }
  /// Stable while any copy of this environment is alive.
  const void* identity() const { return offsets_.get(); }

  std::span<const Offset> offsets() const {
    return offsets_ ? std::span<const Offset>(*offsets_) : std::span<const Offset>();
  }

  /// R(n)
  Offset operator[](Index n) const {
    if (n >= size()) {
      throw MalformedState("renaming environment has no slot " + std::to_string(n) +
                           " (size " + std::to_string(size()) + ")");
    }
    return (*offsets_)[n];
  }

  /// 0 : R
  RenamingEnv push_front(Offset offset = 0) const {
    std::vector<Offset> out;
    out.reserve(size() + 1);
    out.push_back(offset);
    out.insert(out.end(), offsets().begin(), offsets().end());
    return RenamingEnv(std::move(out));
  }

  friend bool operator==(const RenamingEnv& a, const RenamingEnv& b) {
    if (a.offsets_ == b.offsets_) return true;
    auto x = a.offsets();
    auto y = b.offsets();
    return std::equal(x.begin(), x.end(), y.begin(), y.end());
  }

 private:
  std::shared_ptr<const std::vector<Offset>> offsets_;
};

inline Offset lookup(const RenamingEnv& r, Index n) { return r[n]; }

namespace detail {

inline Offset to_offset(Index x) {
  if (x > static_cast<Index>(std::numeric_limits<Offset>::max())) {
    throw IndexOverflow("offset out of range");
  }
  return static_cast<Offset>(x);
}

inline Offset add_offsets(Offset a, Offset b) {
  Offset out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw IndexOverflow("offset overflow");
  return out;
}

}  // namespace detail

/// n + R(n), the distance in binds from the variable to its binding.
inline Index effective_index(const RenamingEnv& r, Index n) {
  const Offset reach = detail::add_offsets(detail::to_offset(n), r[n]);
  if (reach < 0) {
    throw MalformedState("variable " + std::to_string(n) + " has negative effective index");
  }
  return static_cast<Index>(reach);
}

inline RenamingEnv concat(const RenamingEnv& front, const RenamingEnv& back) {
  std::vector<Offset> out(front.offsets().begin(), front.offsets().end());
  out.insert(out.end(), back.offsets().begin(), back.offsets().end());
  return RenamingEnv(std::move(out));
}

/// R ↑ x: every offset incremented by x.
inline RenamingEnv add_all(const RenamingEnv& r, Index x) {
  if (x == 0 || r.empty()) return r;
  const Offset dx = detail::to_offset(x);
  std::vector<Offset> out;
  out.reserve(r.size());
  for (Offset i : r.offsets()) out.push_back(detail::add_offsets(i, dx));
  return RenamingEnv(std::move(out));
}

namespace detail {

inline Term apply_under(const RenamingEnv& r, const Term& t, Index depth) {
  // Only indices reaching past the binders crossed so far read the
  // environment; slot n of the inner environment 0:...:0:R is R(n - depth).
  if (t.free_bound() <= depth) return t;
  switch (t.kind()) {
    case TermKind::var:
      if (t.index() < depth) return t;
      return Term::var(checked_add(effective_index(r, t.index() - depth), depth));
    case TermKind::lam:
      return Term::lam(apply_under(r, t.body(), depth + 1));
    case TermKind::app:
      return Term::app(apply_under(r, t.fn(), depth), apply_under(r, t.arg(), depth));
  }
  return t;
}

}  // namespace detail

/// R·M: the term with every delayed offset applied.
inline Term apply(const RenamingEnv& r, const Term& t) {
  if (r.empty()) return t;
  return detail::apply_under(r, t, 0);
}

/// (M, R) ⇕ (x, ℓ): slot j moves by x whenever j + R(j) > ℓ.
///
/// The adjustment is applied to every slot, whether or not j occurs in the
/// accompanying term; slots for absent variables are never read. A negative
/// threshold selects every slot.
inline RenamingEnv adjust(const Term& /*t*/, const RenamingEnv& r, Offset x, Offset threshold) {
  if (x == 0 || r.empty()) return r;
  std::vector<Offset> out;
  out.reserve(r.size());
  Offset j = 0;
  for (Offset offset : r.offsets()) {
    const Offset reach = detail::add_offsets(j, offset);
    if (reach > threshold) {
      if (detail::add_offsets(reach, x) < 0) {
        throw MalformedState("offset adjustment moves slot " + std::to_string(j) +
                             " below index zero");
      }
      out.push_back(detail::add_offsets(offset, x));
    } else {
      out.push_back(offset);
    }
    ++j;
  }
  return RenamingEnv(std::move(out));
}

}  // namespace cbneed

#endif  // CBNEED_RENAMING_HPP
