#pragma once

// Defining-function DSL over z, zbar, w, wbar.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' ['-'] integer | '^' '(' ['-'] integer ')')?
//   primary := number | 'i' | 'z' | 'zbar' | 'w' | 'wbar'
//            | ('conj' | 'Re' | 'Im' | 'abs2') '(' expr ')'
//            | '(' expr ')'
//
// Unary minus is lowered to multiplication by -1 and negative exponents to a
// division, so the tree only holds the node kinds listed in NodeKind.
// Arithmetic between literals is folded while parsing, so printed complex
// literals read back as single literals.

#include <array>
#include <cctype>
#include <complex>
#include <cstdlib>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "crsphere/error.hpp"
#include "crsphere/jet.hpp"

namespace crsphere::expr {

enum class Var { z = 0, zbar = 1, w = 2, wbar = 3 };

enum class NodeKind { variable, literal, add, sub, mul, div, power, conj, re, im, abs2 };

struct Node {
  NodeKind kind = NodeKind::literal;
  Var var = Var::z;
  Complex value{};
  int exponent = 0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

using NodePtr = std::shared_ptr<const Node>;

/// Immutable expression tree.
class ExprAst {
 public:
  explicit ExprAst(NodePtr root) : root_(std::move(root)) {}
  const Node& root() const noexcept { return *root_; }
  const NodePtr& root_ptr() const noexcept { return root_; }

 private:
  NodePtr root_;
};

namespace build {

inline NodePtr make(NodeKind k, NodePtr a = {}, NodePtr b = {}) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}
inline NodePtr var(Var v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::variable;
  n->var = v;
  return n;
}
inline NodePtr lit(Complex c) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::literal;
  n->value = c;
  return n;
}
inline NodePtr add(NodePtr a, NodePtr b) { return make(NodeKind::add, std::move(a), std::move(b)); }
inline NodePtr sub(NodePtr a, NodePtr b) { return make(NodeKind::sub, std::move(a), std::move(b)); }
inline NodePtr mul(NodePtr a, NodePtr b) { return make(NodeKind::mul, std::move(a), std::move(b)); }
inline NodePtr div(NodePtr a, NodePtr b) { return make(NodeKind::div, std::move(a), std::move(b)); }
inline NodePtr conj(NodePtr a) { return make(NodeKind::conj, std::move(a)); }
inline NodePtr re(NodePtr a) { return make(NodeKind::re, std::move(a)); }
inline NodePtr im(NodePtr a) { return make(NodeKind::im, std::move(a)); }
inline NodePtr abs2(NodePtr a) { return make(NodeKind::abs2, std::move(a)); }
inline NodePtr neg(NodePtr a) { return mul(lit(-1.0), std::move(a)); }
inline NodePtr pow(NodePtr a, int e) {
  if (e < 0) return div(lit(1.0), pow(std::move(a), -e));
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::power;
  n->exponent = e;
  n->lhs = std::move(a);
  return n;
}

}  // namespace build

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprAst parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError(pos_, "empty input");
    NodePtr root = parse_expr();
    skip_ws();
    if (pos_ < text_.size()) {
      if (text_[pos_] == ')') throw ParseError(pos_, "unbalanced parenthesis: unexpected ')'");
      throw ParseError(pos_, std::string("unexpected character '") + text_[pos_] + "'");
    }
    return ExprAst(std::move(root));
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_close(std::size_t open_pos) {
    skip_ws();
    if (pos_ >= text_.size()) {
      throw ParseError(pos_, "unbalanced parenthesis, '(' from offset " + std::to_string(open_pos) +
                                 " still open at end of input");
    }
    if (text_[pos_] != ')') throw ParseError(pos_, "expected ')'");
    ++pos_;
  }

  static NodePtr fold(NodePtr n) {
    const bool lit_l = n->lhs && n->lhs->kind == NodeKind::literal;
    const bool lit_r = n->rhs && n->rhs->kind == NodeKind::literal;
    switch (n->kind) {
      case NodeKind::add: if (lit_l && lit_r) return build::lit(n->lhs->value + n->rhs->value); break;
      case NodeKind::sub: if (lit_l && lit_r) return build::lit(n->lhs->value - n->rhs->value); break;
      case NodeKind::mul: if (lit_l && lit_r) return build::lit(n->lhs->value * n->rhs->value); break;
      case NodeKind::div:
        if (lit_l && lit_r && n->rhs->value != Complex{}) return build::lit(n->lhs->value / n->rhs->value);
        break;
      default: break;
    }
    return n;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = fold(build::add(lhs, parse_term()));
      } else if (accept('-')) {
        lhs = fold(build::sub(lhs, parse_term()));
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = fold(build::mul(lhs, parse_unary()));
      } else if (accept('/')) {
        lhs = fold(build::div(lhs, parse_unary()));
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return fold(build::neg(parse_unary()));
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (!accept('^')) return base;
    bool paren = accept('(');
    const std::size_t open = pos_ - 1;
    bool negative = accept('-');
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) throw ParseError(start, "expected integer exponent");
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      throw ParseError(pos_, "exponent must be an integer");
    }
    const std::string digits(text_.substr(start, pos_ - start));
    if (digits.size() > 6) throw ParseError(start, "exponent too large");
    int e = std::stoi(digits);
    if (paren) expect_close(open);
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '^') {
      throw ParseError(pos_, "chained exponent; use parentheses");
    }
    return build::pow(std::move(base), negative ? -e : e);
  }

  NodePtr parse_number() {
    const char* begin = text_.data() + pos_;
    // strtod needs a terminated buffer; copy the maximal numeric prefix.
    std::size_t end = pos_;
    while (end < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
            ((text_[end] == 'e' || text_[end] == 'E') && end + 1 < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[end + 1])) ||
              ((text_[end + 1] == '-' || text_[end + 1] == '+') && end + 2 < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[end + 2]))))) ||
            ((text_[end] == '-' || text_[end] == '+') && end > pos_ &&
             (text_[end - 1] == 'e' || text_[end - 1] == 'E')))) {
      ++end;
    }
    std::string buf(begin, end - pos_);
    char* stop = nullptr;
    double v = std::strtod(buf.c_str(), &stop);
    if (stop != buf.c_str() + buf.size()) throw ParseError(pos_, "malformed number");
    pos_ = end;
    return build::lit(v);
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of input");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (c == '(') {
      const std::size_t open = pos_++;
      NodePtr inner = parse_expr();
      expect_close(open);
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string_view id = text_.substr(start, pos_ - start);
      if (id == "z") return build::var(Var::z);
      if (id == "zbar") return build::var(Var::zbar);
      if (id == "w") return build::var(Var::w);
      if (id == "wbar") return build::var(Var::wbar);
      if (id == "i") return build::lit(Complex(0.0, 1.0));
      NodeKind fn;
      if (id == "conj") {
        fn = NodeKind::conj;
      } else if (id == "Re") {
        fn = NodeKind::re;
      } else if (id == "Im") {
        fn = NodeKind::im;
      } else if (id == "abs2") {
        fn = NodeKind::abs2;
      } else {
        throw ParseError(start, "unknown identifier '" + std::string(id) + "'");
      }
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != '(') {
        throw ParseError(pos_, "expected '(' after " + std::string(id));
      }
      const std::size_t open = pos_++;
      NodePtr arg = parse_expr();
      expect_close(open);
      return build::make(fn, std::move(arg));
    }
    throw ParseError(pos_, std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ExprAst parse(std::string_view text) { return detail::Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Printing (fully parenthesized; re-parses to the same tree)

inline void print(std::ostream& os, const Node& n) {
  switch (n.kind) {
    case NodeKind::variable: {
      static constexpr const char* names[] = {"z", "zbar", "w", "wbar"};
      os << names[static_cast<int>(n.var)];
      return;
    }
    case NodeKind::literal: {
      os.precision(17);
      if (n.value.imag() == 0.0 && n.value.real() >= 0.0) {
        os << n.value.real();
      } else {
        os << "(" << n.value.real() << "+" << n.value.imag() << "*i)";
      }
      return;
    }
    case NodeKind::add: os << "("; print(os, *n.lhs); os << " + "; print(os, *n.rhs); os << ")"; return;
    case NodeKind::sub: os << "("; print(os, *n.lhs); os << " - "; print(os, *n.rhs); os << ")"; return;
    case NodeKind::mul: os << "("; print(os, *n.lhs); os << " * "; print(os, *n.rhs); os << ")"; return;
    case NodeKind::div: os << "("; print(os, *n.lhs); os << " / "; print(os, *n.rhs); os << ")"; return;
    case NodeKind::power: os << "("; print(os, *n.lhs); os << ")^" << n.exponent; return;
    case NodeKind::conj: os << "conj("; print(os, *n.lhs); os << ")"; return;
    case NodeKind::re: os << "Re("; print(os, *n.lhs); os << ")"; return;
    case NodeKind::im: os << "Im("; print(os, *n.lhs); os << ")"; return;
    case NodeKind::abs2: os << "abs2("; print(os, *n.lhs); os << ")"; return;
  }
}

inline std::string to_string(const ExprAst& ast) {
  std::ostringstream os;
  print(os, ast.root());
  return os.str();
}

// ---------------------------------------------------------------------------
// Jet expansion

/// Complex conjugation on a jet in (z, zbar, w, wbar) offsets: swaps the
/// variables of each conjugate pair and conjugates the coefficients.
inline Jet conjugate(const Jet& a) {
  static constexpr int swap_pairs[] = {1, 0, 3, 2};
  Jet r = permute_variables(a, std::span<const int>(swap_pairs));
  for (int i = 0; i < r.size(); ++i) r[i] = std::conj(r[i]);
  return r;
}

using Point = std::array<Complex, 2>;

namespace detail {

inline Jet expand_node(const Node& n, const Point& p, JetContext ctx) {
  switch (n.kind) {
    case NodeKind::variable: {
      const int v = static_cast<int>(n.var);
      const Complex base = v == 0 ? p[0] : v == 1 ? std::conj(p[0]) : v == 2 ? p[1] : std::conj(p[1]);
      return Jet::variable(ctx, v) + base;
    }
    case NodeKind::literal: return Jet::constant(ctx, n.value);
    case NodeKind::add: return expand_node(*n.lhs, p, ctx) + expand_node(*n.rhs, p, ctx);
    case NodeKind::sub: return expand_node(*n.lhs, p, ctx) - expand_node(*n.rhs, p, ctx);
    case NodeKind::mul: return expand_node(*n.lhs, p, ctx) * expand_node(*n.rhs, p, ctx);
    case NodeKind::div: {
      Jet den = expand_node(*n.rhs, p, ctx);
      const double scale = std::max(1.0, max_abs(den));
      if (std::abs(den.constant_term()) <= 1e-14 * scale) {
        throw Error(ErrorKind::division_by_zero, "division by an expression vanishing at the base point");
      }
      return expand_node(*n.lhs, p, ctx) * invert(den);
    }
    case NodeKind::power: return crsphere::pow(expand_node(*n.lhs, p, ctx), n.exponent);
    case NodeKind::conj: return conjugate(expand_node(*n.lhs, p, ctx));
    case NodeKind::re: {
      Jet h = expand_node(*n.lhs, p, ctx);
      return (h + conjugate(h)) * Complex(0.5, 0.0);
    }
    case NodeKind::im: {
      Jet h = expand_node(*n.lhs, p, ctx);
      return (h - conjugate(h)) * Complex(0.0, -0.5);
    }
    case NodeKind::abs2: {
      Jet h = expand_node(*n.lhs, p, ctx);
      return h * conjugate(h);
    }
  }
  throw Error(ErrorKind::invalid_input, "corrupt expression node");
}

}  // namespace detail

/// Taylor jet of the expression at (p, conj p) in the offset variables
/// (z - p0, zbar - conj p0, w - p1, wbar - conj p1), treated as independent.
inline Jet expand_at(const ExprAst& ast, const Point& p, JetContext ctx) {
  if (ctx.nvars != 4) throw Error(ErrorKind::invalid_input, "expand_at needs a 4-variable context");
  if (ctx.degree < 1) throw Error(ErrorKind::invalid_input, "expand_at needs degree >= 1");
  if (ctx.degree > kMaxJetDegree) {
    throw Error(ErrorKind::degree_overflow, "expansion degree above " + std::to_string(kMaxJetDegree));
  }
  return detail::expand_node(ast.root(), p, ctx);
}

/// Direct evaluation with z, zbar, w, wbar as independent complex values.
inline Complex evaluate(const Node& n, const std::array<Complex, 4>& v) {
  switch (n.kind) {
    case NodeKind::variable: return v[static_cast<std::size_t>(n.var)];
    case NodeKind::literal: return n.value;
    case NodeKind::add: return evaluate(*n.lhs, v) + evaluate(*n.rhs, v);
    case NodeKind::sub: return evaluate(*n.lhs, v) - evaluate(*n.rhs, v);
    case NodeKind::mul: return evaluate(*n.lhs, v) * evaluate(*n.rhs, v);
    case NodeKind::div: {
      const Complex d = evaluate(*n.rhs, v);
      if (d == Complex{}) throw Error(ErrorKind::division_by_zero, "division by zero");
      return evaluate(*n.lhs, v) / d;
    }
    case NodeKind::power: {
      Complex r = 1.0;
      const Complex b = evaluate(*n.lhs, v);
      for (int k = 0; k < n.exponent; ++k) r *= b;
      return r;
    }
    case NodeKind::conj:
    case NodeKind::re:
    case NodeKind::im:
    case NodeKind::abs2: {
      const std::array<Complex, 4> swapped{std::conj(v[1]), std::conj(v[0]), std::conj(v[3]),
                                           std::conj(v[2])};
      const Complex h = evaluate(*n.lhs, v);
      const Complex hc = std::conj(evaluate(*n.lhs, swapped));
      if (n.kind == NodeKind::conj) return hc;
      if (n.kind == NodeKind::re) return 0.5 * (h + hc);
      if (n.kind == NodeKind::im) return Complex(0.0, -0.5) * (h - hc);
      return h * hc;
    }
  }
  throw Error(ErrorKind::invalid_input, "corrupt expression node");
}

inline Complex evaluate(const ExprAst& ast, const std::array<Complex, 4>& v) {
  return evaluate(ast.root(), v);
}

/// Value at an honest point of C^2 (zbar = conj z, wbar = conj w).
inline Complex evaluate_at(const ExprAst& ast, const Point& q) {
  return evaluate(ast, {q[0], std::conj(q[0]), q[1], std::conj(q[1])});
}

/// Coefficientwise reality test: c(a,b,c,d) == conj c(b,a,d,c) within tol.
inline bool check_real(const Jet& j, double tol) {
  if (j.nvars() != 4) throw Error(ErrorKind::invalid_input, "check_real needs a 4-variable jet");
  std::vector<int> e(4);
  for (int i = 0; i < j.size(); ++i) {
    const auto* x = j.layout().exponents(i);
    e = {x[1], x[0], x[3], x[2]};
    const Complex mirror = j[j.layout().rank(e)];
    if (std::abs(j[i] - std::conj(mirror)) > tol) return false;
  }
  return true;
}

/// Pullback by a holomorphic map: z := hz, w := hw, zbar := conj(hz),
/// wbar := conj(hw). The replacement trees are written in z and w.
inline ExprAst compose(const ExprAst& ast, const ExprAst& hz, const ExprAst& hw) {
  struct Rewriter {
    NodePtr hz, hw;
    NodePtr operator()(const NodePtr& n) const {
      if (n->kind == NodeKind::variable) {
        switch (n->var) {
          case Var::z: return hz;
          case Var::w: return hw;
          case Var::zbar: return build::conj(hz);
          case Var::wbar: return build::conj(hw);
        }
      }
      if (n->kind == NodeKind::literal) return n;
      auto copy = std::make_shared<Node>(*n);
      if (n->lhs) copy->lhs = (*this)(n->lhs);
      if (n->rhs) copy->rhs = (*this)(n->rhs);
      return copy;
    }
  };
  return ExprAst(Rewriter{hz.root_ptr(), hw.root_ptr()}(ast.root_ptr()));
}

/// Exchanges the roles of z and w.
inline ExprAst swap_coordinates(const ExprAst& ast) {
  return compose(ast, ExprAst(build::var(Var::w)), ExprAst(build::var(Var::z)));
}

}  // namespace crsphere::expr
