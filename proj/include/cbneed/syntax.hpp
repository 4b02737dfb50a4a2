#ifndef CBNEED_SYNTAX_HPP
#define CBNEED_SYNTAX_HPP

// Surface syntax: a named front end, the nameless form, conversion between
// them, and printers.
//
//   de Bruijn:  term := natural | "\." term | term term | "(" term ")"
//   named:      term := ident   | "\" ident "." term | term term | "(" term ")"
//
// Application is left-associative and binds tighter than a binder body, which
// extends as far right as possible. "--" starts a comment that runs to the end
// of the line. The UTF-8 letter λ is accepted as an alias for the backslash.

#include <cctype>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "cbneed/term.hpp"

namespace cbneed {

enum class Syntax { named, debruijn };

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& message, std::size_t line, std::size_t column)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class UnboundVariable : public std::runtime_error {
 public:
  explicit UnboundVariable(std::string name)
      : std::runtime_error("unbound variable \"" + name + "\""), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// Named lambda term, used only at the front end.
class NamedTerm {
 public:
  struct Var {
    std::string name;
  };
  struct Lam {
    std::string name;
    std::shared_ptr<const NamedTerm> body;
  };
  struct App {
    std::shared_ptr<const NamedTerm> fn;
    std::shared_ptr<const NamedTerm> arg;
  };

  static NamedTerm var(std::string name) { return NamedTerm(Var{std::move(name)}); }
  static NamedTerm lam(std::string name, NamedTerm body) {
    return NamedTerm(Lam{std::move(name), std::make_shared<const NamedTerm>(std::move(body))});
  }
  static NamedTerm app(NamedTerm fn, NamedTerm arg) {
    return NamedTerm(App{std::make_shared<const NamedTerm>(std::move(fn)),
                         std::make_shared<const NamedTerm>(std::move(arg))});
  }

  const std::variant<Var, Lam, App>& node() const { return node_; }

  friend bool operator==(const NamedTerm& a, const NamedTerm& b) {
    if (a.node_.index() != b.node_.index()) return false;
    if (auto* x = std::get_if<Var>(&a.node_)) return x->name == std::get<Var>(b.node_).name;
    if (auto* x = std::get_if<Lam>(&a.node_)) {
      const auto& y = std::get<Lam>(b.node_);
      return x->name == y.name && *x->body == *y.body;
    }
    const auto& x = std::get<App>(a.node_);
    const auto& y = std::get<App>(b.node_);
    return *x.fn == *y.fn && *x.arg == *y.arg;
  }

 private:
  explicit NamedTerm(std::variant<Var, Lam, App> n) : node_(std::move(n)) {}
  std::variant<Var, Lam, App> node_;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, Syntax syntax) : text_(text), syntax_(syntax) {}

  template <typename Out>
  Out parse_all() {
    skip_space();
    if (at_end()) fail("empty input");
    Out t = parse_term<Out>();
    skip_space();
    if (!at_end()) fail(peek() == ')' ? "unbalanced ')'" : "unexpected character");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw SyntaxError(message, line_, column_);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && !at_end(); ++i) {
      if (text_[pos_] == '\n') {
        ++line_;
        column_ = 1;
      } else {
        ++column_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    for (;;) {
      if (at_end()) return;
      const char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (text_.substr(pos_, 2) == "--") {
        while (!at_end() && peek() != '\n') advance();
      } else {
        return;
      }
    }
  }

  bool at_lambda() const { return peek() == '\\' || text_.substr(pos_, 2) == "\xCE\xBB"; }
  void eat_lambda() { advance(peek() == '\\' ? 1 : 2); }

  static bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
  }

  bool at_atom_start() const {
    const char c = peek();
    if (c == '(' || at_lambda()) return true;
    return syntax_ == Syntax::debruijn ? std::isdigit(static_cast<unsigned char>(c)) != 0
                                       : ident_start(c);
  }

  void expect(char c, const char* what) {
    skip_space();
    if (peek() != c) fail(std::string("expected ") + what);
    advance();
  }

  std::string identifier() {
    skip_space();
    if (!ident_start(peek())) fail("expected identifier");
    const std::size_t start = pos_;
    while (!at_end() && ident_char(peek())) advance();
    return std::string(text_.substr(start, pos_ - start));
  }

  Index natural() {
    Index value = 0;
    const std::size_t line = line_, column = column_;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
      const Index digit = static_cast<Index>(peek() - '0');
      if (value > (std::numeric_limits<Index>::max() - digit) / 10) {
        throw SyntaxError("index literal overflows 64 bits", line, column);
      }
      value = value * 10 + digit;
      advance();
    }
    return value;
  }

  template <typename Out>
  Out parse_term() {
    Out acc = parse_atom<Out>();
    for (;;) {
      skip_space();
      if (at_end() || !at_atom_start()) return acc;
      acc = Out::app(std::move(acc), parse_atom<Out>());
    }
  }

  template <typename Out>
  Out parse_atom() {
    skip_space();
    if (at_lambda()) {
      eat_lambda();
      if constexpr (std::is_same_v<Out, Term>) {
        expect('.', "'.' after binder");
        return Out::lam(parse_body<Out>());
      } else {
        std::string name = identifier();
        expect('.', "'.' after bound name");
        return Out::lam(std::move(name), parse_body<Out>());
      }
    }
    if (peek() == '(') {
      advance();
      skip_space();
      if (peek() == ')') fail("empty parentheses");
      Out inner = parse_term<Out>();
      expect(')', "')'");
      return inner;
    }
    if constexpr (std::is_same_v<Out, Term>) {
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected term");
      return Out::var(natural());
    } else {
      if (!ident_start(peek())) fail("expected term");
      return Out::var(identifier());
    }
  }

  template <typename Out>
  Out parse_body() {
    skip_space();
    if (at_end() || !at_atom_start()) fail("expected binder body");
    return parse_term<Out>();
  }

  std::string_view text_;
  Syntax syntax_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

}  // namespace detail

inline Term parse_debruijn(std::string_view text) {
  return detail::Parser(text, Syntax::debruijn).parse_all<Term>();
}

inline NamedTerm parse_named(std::string_view text) {
  return detail::Parser(text, Syntax::named).parse_all<NamedTerm>();
}

/// Converts a named term to lexical addresses. Every variable must be bound.
inline Term to_debruijn(const NamedTerm& t) {
  struct Converter {
    std::vector<const std::string*> scope;  // innermost binder last

    Term operator()(const NamedTerm& u) {
      return std::visit(
          [this](const auto& n) -> Term {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, NamedTerm::Var>) {
              for (std::size_t i = scope.size(); i-- > 0;) {
                if (*scope[i] == n.name) return Term::var(scope.size() - 1 - i);
              }
              throw UnboundVariable(n.name);
            } else if constexpr (std::is_same_v<N, NamedTerm::Lam>) {
              scope.push_back(&n.name);
              Term body = (*this)(*n.body);
              scope.pop_back();
              return Term::lam(std::move(body));
            } else {
              Term fn = (*this)(*n.fn);
              return Term::app(std::move(fn), (*this)(*n.arg));
            }
          },
          u.node());
    }
  };
  return Converter{}(t);
}

/// Restores names: the binder at depth d is called x<d>. Free indices become
/// f<k>, where k is the index relative to the top of the term.
inline NamedTerm to_named(const Term& t, Index depth = 0) {
  switch (t.kind()) {
    case TermKind::var:
      if (t.index() < depth) return NamedTerm::var("x" + std::to_string(depth - 1 - t.index()));
      return NamedTerm::var("f" + std::to_string(t.index() - depth));
    case TermKind::lam:
      return NamedTerm::lam("x" + std::to_string(depth), to_named(t.body(), depth + 1));
    case TermKind::app:
      return NamedTerm::app(to_named(t.fn(), depth), to_named(t.arg(), depth));
  }
  return NamedTerm::var("?");
}

namespace detail {

inline void print_into(std::ostream& os, const Term& t) {
  switch (t.kind()) {
    case TermKind::var:
      os << t.index();
      return;
    case TermKind::lam:
      os << "\\. ";
      print_into(os, t.body());
      return;
    case TermKind::app: {
      const Term f = t.fn();
      const Term a = t.arg();
      if (f.is_lam()) os << '(';
      print_into(os, f);
      if (f.is_lam()) os << ')';
      os << ' ';
      if (!a.is_var()) os << '(';
      print_into(os, a);
      if (!a.is_var()) os << ')';
      return;
    }
  }
}

inline void print_into(std::ostream& os, const NamedTerm& t) {
  std::visit(
      [&os](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, NamedTerm::Var>) {
          os << n.name;
        } else if constexpr (std::is_same_v<N, NamedTerm::Lam>) {
          os << '\\' << n.name << ". ";
          print_into(os, *n.body);
        } else {
          const bool fn_lam = std::holds_alternative<NamedTerm::Lam>(n.fn->node());
          const bool arg_var = std::holds_alternative<NamedTerm::Var>(n.arg->node());
          if (fn_lam) os << '(';
          print_into(os, *n.fn);
          if (fn_lam) os << ')';
          os << ' ';
          if (!arg_var) os << '(';
          print_into(os, *n.arg);
          if (!arg_var) os << ')';
        }
      },
      t.node());
}

}  // namespace detail

inline std::string print(const Term& t) {
  std::ostringstream os;
  detail::print_into(os, t);
  return os.str();
}

inline std::string print(const NamedTerm& t) {
  std::ostringstream os;
  detail::print_into(os, t);
  return os.str();
}

/// Prints a nameless term in either surface syntax.
inline std::string print(const Term& t, Syntax syntax) {
  return syntax == Syntax::debruijn ? print(t) : print(to_named(t));
}

/// Parses either syntax and returns the nameless form.
inline Term parse(std::string_view text, Syntax syntax) {
  return syntax == Syntax::debruijn ? parse_debruijn(text) : to_debruijn(parse_named(text));
}

}  // namespace cbneed

#endif  // CBNEED_SYNTAX_HPP
