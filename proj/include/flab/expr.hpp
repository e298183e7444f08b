#pragma once

// Metric expression language.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | atom ('^' ['-'|'+'] real)?
//   atom   := real | ident | func '(' expr ')' | '(' expr ')'
//   ident  := ('z'|'v') digit+
//   func   := abs2 | re | im | sqrt | exp | log | conj
//
// Variables are complex: z<k> = x^k + i x^{k+n}, v<k> = y^k + i y^{k+n}.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flab/error.hpp"
#include "flab/jet.hpp"

namespace flab {

enum class NodeKind { Constant, Variable, Conj, Neg, Add, Sub, Mul, Div, Pow, Abs2, Re, Im, Sqrt, Exp, Log };
enum class VarKind { Z, V };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind;
  double value = 0;  // constant value, or exponent for Pow
  VarKind var = VarKind::Z;
  int index = 0;  // 1-based variable index
  std::vector<NodePtr> args;
};

namespace detail {

inline const char* function_name(NodeKind k) {
  switch (k) {
    case NodeKind::Abs2: return "abs2";
    case NodeKind::Re: return "re";
    case NodeKind::Im: return "im";
    case NodeKind::Sqrt: return "sqrt";
    case NodeKind::Exp: return "exp";
    case NodeKind::Log: return "log";
    case NodeKind::Conj: return "conj";
    default: return nullptr;
  }
}

inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// |im| small enough relative to |re| that the value is treated as real.
inline bool numerically_real(std::complex<double> w) {
  return std::abs(w.imag()) <= 1e-12 * std::max(1.0, std::abs(w.real()));
}

}  // namespace detail

/// Immutable expression tree; copies share nodes.
class MetricExpr {
 public:
  MetricExpr() = default;
  explicit MetricExpr(NodePtr root) : root_(std::move(root)) {}

  const NodePtr& root() const { return root_; }
  bool empty() const { return !root_; }

  // Builders.
  static MetricExpr constant(double c) { return MetricExpr(make(NodeKind::Constant, c)); }
  static MetricExpr z(int k) { return variable(VarKind::Z, k); }
  static MetricExpr v(int k) { return variable(VarKind::V, k); }
  static MetricExpr variable(VarKind var, int k) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->var = var;
    n->index = k;
    return MetricExpr(n);
  }
  static MetricExpr unary(NodeKind kind, const MetricExpr& a) { return MetricExpr(make(kind, 0, {a.root_})); }
  static MetricExpr binary(NodeKind kind, const MetricExpr& a, const MetricExpr& b) {
    return MetricExpr(make(kind, 0, {a.root_, b.root_}));
  }
  static MetricExpr pow(const MetricExpr& a, double p) { return MetricExpr(make(NodeKind::Pow, p, {a.root_})); }

  friend MetricExpr operator+(const MetricExpr& a, const MetricExpr& b) { return binary(NodeKind::Add, a, b); }
  friend MetricExpr operator-(const MetricExpr& a, const MetricExpr& b) { return binary(NodeKind::Sub, a, b); }
  friend MetricExpr operator*(const MetricExpr& a, const MetricExpr& b) { return binary(NodeKind::Mul, a, b); }
  friend MetricExpr operator/(const MetricExpr& a, const MetricExpr& b) { return binary(NodeKind::Div, a, b); }

  /// Canonical text; parse(print(e)) is structurally equal to e.
  std::string print() const {
    std::string out;
    print_node(*root_, out, true);
    return out;
  }

  bool structurally_equal(const MetricExpr& o) const { return equal(*root_, *o.root_); }

  /// Largest variable index appearing in the tree (0 if none).
  int max_index() const { return max_index(*root_); }
  int min_index() const {
    int m = 1 << 30;
    visit(*root_, [&](const Node& n) {
      if (n.kind == NodeKind::Variable) m = std::min(m, n.index);
    });
    return m;
  }

  /// Value at complex coordinates z, v (0-based arrays, 1-based names).
  std::complex<double> evaluate(std::span<const std::complex<double>> z,
                                std::span<const std::complex<double>> v) const {
    return eval(*root_, z, v);
  }

  /// Real and imaginary jets of the expression at (x0, y0).
  struct JetValue {
    RealJet re;
    RealJet im;
    bool real = true;  // im identically zero by construction
  };
  JetValue evaluate_jet(const JetSpace& space, std::span<const double> x0, std::span<const double> y0) const {
    JetEval ev{space, x0, y0, {}};
    return ev.eval(*root_);
  }

 private:
  static NodePtr make(NodeKind k, double value, std::vector<NodePtr> args = {}) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->value = value;
    n->args = std::move(args);
    return n;
  }

  template <class F>
  static void visit(const Node& n, F&& f) {
    f(n);
    for (const auto& a : n.args) visit(*a, f);
  }

  static int max_index(const Node& n) {
    int m = n.kind == NodeKind::Variable ? n.index : 0;
    for (const auto& a : n.args) m = std::max(m, max_index(*a));
    return m;
  }

  static bool equal(const Node& a, const Node& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
    if (a.kind == NodeKind::Constant || a.kind == NodeKind::Pow)
      if (a.value != b.value) return false;
    if (a.kind == NodeKind::Variable && (a.var != b.var || a.index != b.index)) return false;
    for (size_t i = 0; i < a.args.size(); ++i)
      if (!equal(*a.args[i], *b.args[i])) return false;
    return true;
  }

  static bool is_atom(const Node& n) {
    return (n.kind == NodeKind::Constant && n.value >= 0) || n.kind == NodeKind::Variable ||
           detail::function_name(n.kind) != nullptr;
  }

  static void print_node(const Node& n, std::string& out, bool top) {
    switch (n.kind) {
      case NodeKind::Constant:
        if (n.value < 0) {
          out += "(-" + detail::format_real(-n.value) + ")";
        } else {
          out += detail::format_real(n.value);
        }
        return;
      case NodeKind::Variable:
        out += (n.var == VarKind::Z ? "z" : "v") + std::to_string(n.index);
        return;
      case NodeKind::Neg:
        out += "(-";
        print_node(*n.args[0], out, false);
        out += ")";
        return;
      case NodeKind::Add:
      case NodeKind::Sub:
      case NodeKind::Mul:
      case NodeKind::Div: {
        const char op = n.kind == NodeKind::Add ? '+' : n.kind == NodeKind::Sub ? '-' : n.kind == NodeKind::Mul ? '*' : '/';
        if (!top) out += "(";
        print_node(*n.args[0], out, false);
        out += op;
        print_node(*n.args[1], out, false);
        if (!top) out += ")";
        return;
      }
      case NodeKind::Pow: {
        const Node& base = *n.args[0];
        const bool wrap = !is_atom(base);
        if (wrap) out += "(";
        print_node(base, out, true);
        if (wrap) out += ")";
        out += "^" + detail::format_real(n.value);
        return;
      }
      default:
        out += detail::function_name(n.kind);
        out += "(";
        print_node(*n.args[0], out, true);
        out += ")";
        return;
    }
  }

  static std::complex<double> eval(const Node& n, std::span<const std::complex<double>> z,
                                   std::span<const std::complex<double>> v) {
    using C = std::complex<double>;
    auto arg = [&](int i) { return eval(*n.args[i], z, v); };
    auto real_arg = [&](const char* what) {
      C a = arg(0);
      if (!detail::numerically_real(a)) throw DomainError(std::string(what) + " of a non-real value");
      return a.real();
    };
    switch (n.kind) {
      case NodeKind::Constant: return n.value;
      case NodeKind::Variable: {
        auto& src = n.var == VarKind::Z ? z : v;
        if (n.index < 1 || n.index > static_cast<int>(src.size())) throw DomainError("variable index out of range");
        return src[n.index - 1];
      }
      case NodeKind::Conj: return std::conj(arg(0));
      case NodeKind::Neg: return -arg(0);
      case NodeKind::Add: return arg(0) + arg(1);
      case NodeKind::Sub: return arg(0) - arg(1);
      case NodeKind::Mul: return arg(0) * arg(1);
      case NodeKind::Div: {
        C d = arg(1);
        if (d == C{}) throw DomainError("division by zero");
        return arg(0) / d;
      }
      case NodeKind::Pow: {
        C a = arg(0);
        if (is_integer(n.value)) return integer_pow(a, static_cast<long>(n.value));
        if (!detail::numerically_real(a) || a.real() <= 0) throw DomainError("non-integer power of a non-positive value");
        return std::pow(a.real(), n.value);
      }
      case NodeKind::Abs2: return std::norm(arg(0));
      case NodeKind::Re: return arg(0).real();
      case NodeKind::Im: return arg(0).imag();
      case NodeKind::Sqrt: {
        double a = real_arg("sqrt");
        if (a <= 0) throw DomainError("sqrt of a non-positive value");
        return std::sqrt(a);
      }
      case NodeKind::Exp: return std::exp(arg(0));
      case NodeKind::Log: {
        double a = real_arg("log");
        if (a <= 0) throw DomainError("log of a non-positive value");
        return std::log(a);
      }
    }
    return {};
  }

  static bool is_integer(double p) { return p == std::floor(p) && std::abs(p) <= 64; }

  static std::complex<double> integer_pow(std::complex<double> a, long p) {
    if (p < 0) {
      if (a == std::complex<double>{}) throw DomainError("division by zero");
      return 1.0 / integer_pow(a, -p);
    }
    std::complex<double> r = 1, b = a;
    while (p) {
      if (p & 1) r *= b;
      b *= b;
      p >>= 1;
    }
    return r;
  }

  struct JetEval {
    const JetSpace& space;
    std::span<const double> x0, y0;
    std::unordered_map<const Node*, JetValue> memo;

    JetValue eval(const Node& n) {
      auto it = memo.find(&n);
      if (it != memo.end()) return it->second;
      JetValue r = compute(n);
      memo.emplace(&n, r);
      return r;
    }

    JetValue real(RealJet j) { return {std::move(j), RealJet(), true}; }
    JetValue complex(RealJet re, RealJet im) { return {std::move(re), std::move(im), false}; }

    RealJet im_of(const JetValue& a) { return a.real ? RealJet(space) : a.im; }

    /// Real jet of `a`, accepting numerically vanishing imaginary parts.
    RealJet require_real(const JetValue& a, const char* what) {
      if (a.real) return a.re;
      double scale = 0, err = 0;
      for (double c : a.re.coefficients()) scale = std::max(scale, std::abs(c));
      for (double c : a.im.coefficients()) err = std::max(err, std::abs(c));
      if (err > 1e-12 * std::max(1.0, scale)) throw DomainError(std::string(what) + " of a non-real value");
      return a.re;
    }

    JetValue mul(const JetValue& a, const JetValue& b) {
      if (a.real && b.real) return real(a.re * b.re);
      if (a.real) return complex(a.re * b.re, a.re * b.im);
      if (b.real) return complex(a.re * b.re, a.im * b.re);
      // Three-product complex multiplication.
      RealJet k1 = b.re * (a.re + a.im);
      RealJet k2 = a.re * (b.im - b.re);
      RealJet k3 = a.im * (b.re + b.im);
      return complex(k1 - k3, k1 + k2);
    }

    JetValue reciprocal(const JetValue& b) {
      if (b.real) {
        if (b.re.value() == 0) throw DomainError("division by zero");
        return real(inverse(b.re));
      }
      RealJet m = b.re * b.re + b.im * b.im;
      if (m.value() == 0) throw DomainError("division by zero");
      RealJet inv = inverse(m);
      return complex(b.re * inv, -(b.im * inv));
    }

    JetValue ipow(const JetValue& a, long p) {
      if (p < 0) return reciprocal(ipow(a, -p));
      JetValue r = real(RealJet(space, 1.0));
      JetValue b = a;
      bool first = true;
      while (p) {
        if (p & 1) {
          r = first ? b : mul(r, b);
          first = false;
        }
        p >>= 1;
        if (p) b = mul(b, b);
      }
      return r;
    }

    JetValue compute(const Node& n) {
      const int dim = space.dim();
      const int nc = dim / 2;
      switch (n.kind) {
        case NodeKind::Constant: return real(RealJet(space, n.value));
        case NodeKind::Variable: {
          if (n.index < 1 || n.index > nc) throw DomainError("variable index out of range");
          const int k = n.index - 1;
          if (n.var == VarKind::Z)
            return complex(RealJet::variable(space, Block::X, k, x0[k]),
                           RealJet::variable(space, Block::X, k + nc, x0[k + nc]));
          return complex(RealJet::variable(space, Block::Y, k, y0[k]),
                         RealJet::variable(space, Block::Y, k + nc, y0[k + nc]));
        }
        case NodeKind::Conj: {
          JetValue a = eval(*n.args[0]);
          if (a.real) return a;
          return complex(a.re, -a.im);
        }
        case NodeKind::Neg: {
          JetValue a = eval(*n.args[0]);
          if (a.real) return real(-a.re);
          return complex(-a.re, -a.im);
        }
        case NodeKind::Add:
        case NodeKind::Sub: {
          JetValue a = eval(*n.args[0]), b = eval(*n.args[1]);
          const double s = n.kind == NodeKind::Add ? 1.0 : -1.0;
          RealJet re = a.re;
          re.axpy(s, b.re);
          if (a.real && b.real) return real(std::move(re));
          RealJet im = im_of(a);
          im.axpy(s, im_of(b));
          return complex(std::move(re), std::move(im));
        }
        case NodeKind::Mul: return mul(eval(*n.args[0]), eval(*n.args[1]));
        case NodeKind::Div: return mul(eval(*n.args[0]), reciprocal(eval(*n.args[1])));
        case NodeKind::Pow: {
          JetValue a = eval(*n.args[0]);
          if (is_integer(n.value)) return ipow(a, static_cast<long>(n.value));
          RealJet r = require_real(a, "non-integer power");
          if (r.value() <= 0) throw DomainError("non-integer power of a non-positive value");
          return real(flab::pow(r, n.value));
        }
        case NodeKind::Abs2: {
          JetValue a = eval(*n.args[0]);
          if (a.real) return real(a.re * a.re);
          return real(a.re * a.re + a.im * a.im);
        }
        case NodeKind::Re: return real(eval(*n.args[0]).re);
        case NodeKind::Im: return real(im_of(eval(*n.args[0])));
        case NodeKind::Sqrt: {
          RealJet r = require_real(eval(*n.args[0]), "sqrt");
          if (r.value() <= 0) throw DomainError("sqrt of a non-positive value");
          return real(flab::sqrt(r));
        }
        case NodeKind::Log: {
          RealJet r = require_real(eval(*n.args[0]), "log");
          if (r.value() <= 0) throw DomainError("log of a non-positive value");
          return real(flab::log(r));
        }
        case NodeKind::Exp: {
          JetValue a = eval(*n.args[0]);
          RealJet e = flab::exp(a.re);
          if (a.real) return real(std::move(e));
          auto [s, c] = sincos(a.im);
          return complex(e * c, e * s);
        }
      }
      return real(RealJet(space));
    }
  };

  NodePtr root_;
};

/// Recursive-descent parser for the grammar above.
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  MetricExpr parse() {
    MetricExpr e = expr();
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'", {"operator", "end of input"});
    return e;
  }

 private:
  MetricExpr expr() {
    MetricExpr lhs = term();
    for (;;) {
      skip_ws();
      if (accept('+')) lhs = lhs + term();
      else if (accept('-')) lhs = lhs - term();
      else return lhs;
    }
  }

  MetricExpr term() {
    MetricExpr lhs = factor();
    for (;;) {
      skip_ws();
      if (accept('*')) lhs = lhs * factor();
      else if (accept('/')) lhs = lhs / factor();
      else return lhs;
    }
  }

  MetricExpr factor() {
    skip_ws();
    if (accept('-')) {
      MetricExpr a = factor();
      if (a.root()->kind == NodeKind::Constant) return MetricExpr::constant(-a.root()->value);
      return MetricExpr::unary(NodeKind::Neg, a);
    }
    MetricExpr a = atom();
    skip_ws();
    if (accept('^')) {
      skip_ws();
      double sign = 1;
      if (accept('-')) sign = -1;
      else accept('+');
      skip_ws();
      if (pos_ >= text_.size() || !(std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
        fail("expected exponent", {"real"});
      return MetricExpr::pow(a, sign * number());
    }
    return a;
  }

  MetricExpr atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input", {"real", "identifier", "function", "("});
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return MetricExpr::constant(number());
    if (c == '(') {
      ++pos_;
      MetricExpr e = expr();
      expect(')');
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const std::string name(text_.substr(start, pos_ - start));
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        NodeKind kind;
        if (!function_kind(name, kind)) fail_at(start, "unknown function '" + name + "'", {"abs2", "re", "im", "sqrt", "exp", "log", "conj"});
        ++pos_;
        MetricExpr arg = expr();
        expect(')');
        return MetricExpr::unary(kind, arg);
      }
      if (name.size() >= 2 && (name[0] == 'z' || name[0] == 'v') &&
          std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
        int idx = 0;
        std::from_chars(name.data() + 1, name.data() + name.size(), idx);
        return MetricExpr::variable(name[0] == 'z' ? VarKind::Z : VarKind::V, idx);
      }
      fail_at(start, "unknown identifier '" + name + "'", {"z<k>", "v<k>"});
    }
    fail("unexpected '" + std::string(1, c) + "'", {"real", "identifier", "function", "("});
  }

  double number() {
    const size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) fail_at(start, "malformed number", {"real"});
    return v;
  }

  static bool function_kind(const std::string& name, NodeKind& kind) {
    static const std::pair<const char*, NodeKind> table[] = {
        {"abs2", NodeKind::Abs2}, {"re", NodeKind::Re},   {"im", NodeKind::Im},    {"sqrt", NodeKind::Sqrt},
        {"exp", NodeKind::Exp},   {"log", NodeKind::Log}, {"conj", NodeKind::Conj}};
    for (const auto& [n, k] : table)
      if (name == n) {
        kind = k;
        return true;
      }
    return false;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    skip_ws();
    if (!accept(c)) fail(pos_ < text_.size() ? "expected '" + std::string(1, c) + "'" : "unexpected end of input",
                         {std::string(1, c)});
  }
  [[noreturn]] void fail(const std::string& msg, std::vector<std::string> expected) { fail_at(pos_, msg, std::move(expected)); }
  [[noreturn]] void fail_at(size_t pos, const std::string& msg, std::vector<std::string> expected) {
    const int column = static_cast<int>(pos) + 1;
    std::string what = "syntax error at column " + std::to_string(column) + ": " + msg + " (expected";
    for (size_t i = 0; i < expected.size(); ++i) what += (i ? ", " : " ") + expected[i];
    what += ")";
    throw ParseError(what, column, std::move(expected));
  }

  std::string_view text_;
  size_t pos_ = 0;
};

inline MetricExpr parse_metric(std::string_view text) { return Parser(text).parse(); }

}  // namespace flab
