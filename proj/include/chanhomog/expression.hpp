#pragma once

// Closed expression library used for all problem data.
//
// Grammar (whitespace ignored):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' integer)?
//   primary := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
//   var     := 't' | 'x1' | 'xn' | 'y1' | 'yn'
//   func    := 'sin' | 'cos' | 'exp'
//
// x1/xn are the slow (physical) coordinates, y1/yn the fast cell coordinates.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "chanhomog/error.hpp"

namespace chanhomog {

enum class Var : std::uint8_t { t, x1, xn, y1, yn };

inline constexpr std::array<std::string_view, 5> kVarNames = {"t", "x1", "xn", "y1", "yn"};

/// Evaluation point: time, slow coordinates and fast coordinates.
struct Point {
  double t = 0.0;
  double x1 = 0.0;
  double xn = 0.0;
  double y1 = 0.0;
  double yn = 0.0;

  double get(Var v) const {
    switch (v) {
      case Var::t: return t;
      case Var::x1: return x1;
      case Var::xn: return xn;
      case Var::y1: return y1;
      case Var::yn: return yn;
    }
    return 0.0;
  }
};

class Expression {
 public:
  enum class Op : std::uint8_t { Const, Variable, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp };

  struct Node {
    Op op = Op::Const;
    double value = 0.0;  // constant value, or integer exponent for Pow
    Var var = Var::t;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };
  using NodePtr = std::shared_ptr<const Node>;

  Expression() : Expression(make_const(0.0)) {}
  explicit Expression(double c) : Expression(make_const(c)) {}

  static Expression parse(std::string_view text) {
    Parser p{text, 0};
    NodePtr root = p.expr();
    p.skip_ws();
    if (p.pos != text.size()) {
      p.fail("unexpected trailing input");
    }
    Expression e(std::move(root));
    e.source_ = std::string(text);
    return e;
  }

  static Expression variable(Var v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Variable;
    n->var = v;
    return Expression(std::move(n));
  }

  double operator()(const Point& p) const {
    std::array<double, kMaxStack> stack{};
    std::size_t top = 0;
    for (const Instr& in : program_) {
      switch (in.op) {
        case Op::Const: stack[top++] = in.value; break;
        case Op::Variable: stack[top++] = p.get(in.var); break;
        case Op::Add: --top; stack[top - 1] += stack[top]; break;
        case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
        case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
        case Op::Div: --top; stack[top - 1] /= stack[top]; break;
        case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Op::Pow: stack[top - 1] = ipow(stack[top - 1], static_cast<int>(in.value)); break;
        case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
        case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
        case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
      }
    }
    return stack[0];
  }

  /// Symbolic partial derivative with constant folding.
  Expression derivative(Var v) const { return Expression(diff(root_, v)); }

  bool depends_on(Var v) const {
    for (const Instr& in : program_) {
      if (in.op == Op::Variable && in.var == v) return true;
    }
    return false;
  }

  /// True when no variable occurs.
  bool is_constant() const {
    for (const Instr& in : program_) {
      if (in.op == Op::Variable) return false;
    }
    return true;
  }

  /// Text that parses back to an equivalent expression. Returns the original
  /// source when the expression came from parse().
  std::string str() const {
    if (!source_.empty()) return source_;
    return print(root_, 0);
  }

  /// Canonical printed form, ignoring the stored source text.
  std::string canonical() const { return print(root_, 0); }

  friend Expression operator+(const Expression& a, const Expression& b) {
    return Expression(make_add(a.root_, b.root_));
  }
  friend Expression operator-(const Expression& a, const Expression& b) {
    return Expression(make_sub(a.root_, b.root_));
  }
  friend Expression operator*(const Expression& a, const Expression& b) {
    return Expression(make_mul(a.root_, b.root_));
  }
  friend Expression operator/(const Expression& a, const Expression& b) {
    return Expression(make_div(a.root_, b.root_));
  }
  friend Expression operator-(const Expression& a) { return Expression(make_neg(a.root_)); }
  friend Expression operator*(double c, const Expression& b) { return Expression(c) * b; }

 private:
  static constexpr std::size_t kMaxStack = 64;

  struct Instr {
    Op op;
    Var var;
    double value;
  };

  explicit Expression(NodePtr root) : root_(std::move(root)) { compile(); }

  static double ipow(double base, int n) {
    double r = 1.0;
    bool neg = n < 0;
    unsigned k = static_cast<unsigned>(neg ? -n : n);
    while (k) {
      if (k & 1u) r *= base;
      base *= base;
      k >>= 1u;
    }
    return neg ? 1.0 / r : r;
  }

  void compile() {
    program_.clear();
    std::size_t depth = 0;
    std::size_t max_depth = 0;
    emit(root_, depth, max_depth);
    if (max_depth > kMaxStack) {
      throw Error(ErrorCode::ExpressionSyntax, "expression nesting too deep");
    }
  }

  void emit(const NodePtr& n, std::size_t& depth, std::size_t& max_depth) {
    switch (n->op) {
      case Op::Const:
      case Op::Variable:
        program_.push_back({n->op, n->var, n->value});
        max_depth = std::max(max_depth, ++depth);
        return;
      case Op::Neg:
      case Op::Pow:
      case Op::Sin:
      case Op::Cos:
      case Op::Exp:
        emit(n->lhs, depth, max_depth);
        program_.push_back({n->op, n->var, n->value});
        return;
      default:
        emit(n->lhs, depth, max_depth);
        emit(n->rhs, depth, max_depth);
        program_.push_back({n->op, n->var, n->value});
        --depth;
        return;
    }
  }

  static NodePtr make_const(double c) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = c;
    return n;
  }
  static NodePtr make_node(Op op, NodePtr a, NodePtr b = nullptr, double value = 0.0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    n->value = value;
    return n;
  }
  static bool is_const(const NodePtr& n, double c) { return n->op == Op::Const && n->value == c; }

  static NodePtr make_add(NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value + b->value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return make_node(Op::Add, std::move(a), std::move(b));
  }
  static NodePtr make_sub(NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value - b->value);
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return make_neg(std::move(b));
    return make_node(Op::Sub, std::move(a), std::move(b));
  }
  static NodePtr make_mul(NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value * b->value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    return make_node(Op::Mul, std::move(a), std::move(b));
  }
  static NodePtr make_div(NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value / b->value);
    if (is_const(a, 0.0)) return make_const(0.0);
    if (is_const(b, 1.0)) return a;
    return make_node(Op::Div, std::move(a), std::move(b));
  }
  static NodePtr make_neg(NodePtr a) {
    if (a->op == Op::Const) return make_const(-a->value);
    if (a->op == Op::Neg) return a->lhs;
    return make_node(Op::Neg, std::move(a));
  }
  static NodePtr make_pow(NodePtr a, int k) {
    if (k == 0) return make_const(1.0);
    if (k == 1) return a;
    if (a->op == Op::Const) return make_const(ipow(a->value, k));
    return make_node(Op::Pow, std::move(a), nullptr, static_cast<double>(k));
  }

  static NodePtr diff(const NodePtr& n, Var v) {
    switch (n->op) {
      case Op::Const: return make_const(0.0);
      case Op::Variable: return make_const(n->var == v ? 1.0 : 0.0);
      case Op::Add: return make_add(diff(n->lhs, v), diff(n->rhs, v));
      case Op::Sub: return make_sub(diff(n->lhs, v), diff(n->rhs, v));
      case Op::Neg: return make_neg(diff(n->lhs, v));
      case Op::Mul:
        return make_add(make_mul(diff(n->lhs, v), n->rhs), make_mul(n->lhs, diff(n->rhs, v)));
      case Op::Div: {
        NodePtr num = make_sub(make_mul(diff(n->lhs, v), n->rhs), make_mul(n->lhs, diff(n->rhs, v)));
        return make_div(num, make_pow(n->rhs, 2));
      }
      case Op::Pow: {
        int k = static_cast<int>(n->value);
        return make_mul(make_mul(make_const(k), make_pow(n->lhs, k - 1)), diff(n->lhs, v));
      }
      case Op::Sin: return make_mul(make_node(Op::Cos, n->lhs), diff(n->lhs, v));
      case Op::Cos: return make_mul(make_neg(make_node(Op::Sin, n->lhs)), diff(n->lhs, v));
      case Op::Exp: return make_mul(n, diff(n->lhs, v));
    }
    return make_const(0.0);
  }

  static int precedence(Op op) {
    switch (op) {
      case Op::Add:
      case Op::Sub: return 1;
      case Op::Mul:
      case Op::Div: return 2;
      case Op::Neg: return 3;
      case Op::Pow: return 4;
      default: return 5;
    }
  }

  static std::string number(double c) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), c);
    return std::string(buf, res.ptr);
  }

  static std::string print(const NodePtr& n, int parent_prec) {
    std::string s;
    int prec = precedence(n->op);
    switch (n->op) {
      case Op::Const:
        s = number(n->value);
        if (n->value < 0.0) prec = 3;
        break;
      case Op::Variable: s = std::string(kVarNames[static_cast<int>(n->var)]); break;
      case Op::Add: s = print(n->lhs, 1) + " + " + print(n->rhs, 2); break;
      case Op::Sub: s = print(n->lhs, 1) + " - " + print(n->rhs, 2); break;
      case Op::Mul: s = print(n->lhs, 2) + "*" + print(n->rhs, 3); break;
      case Op::Div: s = print(n->lhs, 2) + "/" + print(n->rhs, 3); break;
      case Op::Neg: s = "-" + print(n->lhs, 3); break;
      case Op::Pow: s = print(n->lhs, 5) + "^" + number(n->value); break;
      case Op::Sin: s = "sin(" + print(n->lhs, 0) + ")"; break;
      case Op::Cos: s = "cos(" + print(n->lhs, 0) + ")"; break;
      case Op::Exp: s = "exp(" + print(n->lhs, 0) + ")"; break;
    }
    if (prec < parent_prec) return "(" + s + ")";
    return s;
  }

  struct Parser {
    std::string_view text;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& msg) const {
      throw Error(ErrorCode::ExpressionSyntax,
                  msg + " at offset " + std::to_string(pos) + " in '" + std::string(text) + "'");
    }
    void skip_ws() {
      while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n')) ++pos;
    }
    bool accept(char c) {
      skip_ws();
      if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    NodePtr expr() {
      NodePtr lhs = term();
      for (;;) {
        if (accept('+')) {
          lhs = make_node(Op::Add, lhs, term());
        } else if (accept('-')) {
          lhs = make_node(Op::Sub, lhs, term());
        } else {
          return lhs;
        }
      }
    }
    NodePtr term() {
      NodePtr lhs = unary();
      for (;;) {
        if (accept('*')) {
          lhs = make_node(Op::Mul, lhs, unary());
        } else if (accept('/')) {
          lhs = make_node(Op::Div, lhs, unary());
        } else {
          return lhs;
        }
      }
    }
    NodePtr unary() {
      if (accept('-')) return make_node(Op::Neg, unary());
      if (accept('+')) return unary();
      return power();
    }
    NodePtr power() {
      NodePtr base = primary();
      if (accept('^')) {
        skip_ws();
        bool neg = accept('-');
        skip_ws();
        int k = 0;
        auto res = std::from_chars(text.data() + pos, text.data() + text.size(), k);
        if (res.ec != std::errc()) fail("expected integer exponent");
        pos = static_cast<std::size_t>(res.ptr - text.data());
        return make_node(Op::Pow, base, nullptr, neg ? -k : k);
      }
      return base;
    }
    NodePtr primary() {
      skip_ws();
      if (pos >= text.size()) fail("unexpected end of input");
      char c = text[pos];
      if (c == '(') {
        ++pos;
        NodePtr e = expr();
        if (!accept(')')) fail("expected ')'");
        return e;
      }
      if ((c >= '0' && c <= '9') || c == '.') {
        double v = 0.0;
        auto res = std::from_chars(text.data() + pos, text.data() + text.size(), v);
        if (res.ec != std::errc()) fail("bad number");
        pos = static_cast<std::size_t>(res.ptr - text.data());
        return make_const(v);
      }
      std::size_t start = pos;
      while (pos < text.size() && ((text[pos] >= 'a' && text[pos] <= 'z') ||
                                   (text[pos] >= '0' && text[pos] <= '9'))) {
        ++pos;
      }
      std::string_view word = text.substr(start, pos - start);
      if (word.empty()) fail(std::string("unexpected character '") + c + "'");
      if (word == "pi") return make_const(std::numbers::pi);
      for (std::size_t i = 0; i < kVarNames.size(); ++i) {
        if (word == kVarNames[i]) {
          auto n = std::make_shared<Node>();
          n->op = Op::Variable;
          n->var = static_cast<Var>(i);
          return n;
        }
      }
      Op fn;
      if (word == "sin") {
        fn = Op::Sin;
      } else if (word == "cos") {
        fn = Op::Cos;
      } else if (word == "exp") {
        fn = Op::Exp;
      } else {
        pos = start;
        fail("unknown identifier '" + std::string(word) + "'");
      }
      if (!accept('(')) fail("expected '(' after function name");
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return make_node(fn, arg);
    }
  };

  NodePtr root_;
  std::vector<Instr> program_;
  std::string source_;
};

}  // namespace chanhomog
