#include "eac/expr.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace eac {

struct Expr::Node {
  enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call } kind;
  double value = 0.0;
  std::string name;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make(Expr::Node::Kind k, std::vector<NodePtr> args = {}, double v = 0.0, std::string name = {}) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = k;
  n->value = v;
  n->name = std::move(name);
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  Parser(const std::string& s, std::set<std::string>& vars) : s_(s), vars_(vars) {}

  NodePtr parse_all() {
    NodePtr n = parse_sum();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "expression '" << s_ << "': " << what << " at offset " << pos_;
    throw std::invalid_argument(os.str());
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_sum() {
    NodePtr lhs = parse_product();
    for (;;) {
      if (accept('+'))
        lhs = make(Expr::Node::Kind::Add, {lhs, parse_product()});
      else if (accept('-'))
        lhs = make(Expr::Node::Kind::Sub, {lhs, parse_product()});
      else
        return lhs;
    }
  }

  NodePtr parse_product() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = make(Expr::Node::Kind::Mul, {lhs, parse_unary()});
      else if (accept('/'))
        lhs = make(Expr::Node::Kind::Div, {lhs, parse_unary()});
      else
        return lhs;
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make(Expr::Node::Kind::Neg, {parse_unary()});
    if (accept('+')) return parse_unary();
    NodePtr base = parse_primary();
    if (accept('^')) return make(Expr::Node::Kind::Pow, {base, parse_unary()});
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return make(Expr::Node::Kind::Number, {}, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      std::string id = s_.substr(start, pos_ - start);
      if (accept('(')) {
        std::vector<NodePtr> args{parse_sum()};
        while (accept(',')) args.push_back(parse_sum());
        if (!accept(')')) fail("expected ')' after arguments");
        static const std::set<std::string> unary{"sin", "cos", "tan", "sqrt", "abs"};
        static const std::set<std::string> binary{"min", "max"};
        if (!(unary.count(id) && args.size() == 1) && !(binary.count(id) && args.size() == 2))
          fail("unknown function or wrong arity: " + id);
        return make(Expr::Node::Kind::Call, std::move(args), 0.0, id);
      }
      if (id == "pi") return make(Expr::Node::Kind::Number, {}, 3.14159265358979323846);
      vars_.insert(id);
      return make(Expr::Node::Kind::Var, {}, 0.0, id);
    }
    fail(std::string("unexpected '") + c + "'");
  }

  const std::string& s_;
  std::set<std::string>& vars_;
  std::size_t pos_ = 0;
};

double eval_node(const Expr::Node& n, const std::map<std::string, double>& vars) {
  using K = Expr::Node::Kind;
  switch (n.kind) {
    case K::Number: return n.value;
    case K::Var: {
      auto it = vars.find(n.name);
      if (it == vars.end()) throw std::out_of_range("unbound expression variable: " + n.name);
      return it->second;
    }
    case K::Neg: return -eval_node(*n.args[0], vars);
    case K::Add: return eval_node(*n.args[0], vars) + eval_node(*n.args[1], vars);
    case K::Sub: return eval_node(*n.args[0], vars) - eval_node(*n.args[1], vars);
    case K::Mul: return eval_node(*n.args[0], vars) * eval_node(*n.args[1], vars);
    case K::Div: return eval_node(*n.args[0], vars) / eval_node(*n.args[1], vars);
    case K::Pow: return std::pow(eval_node(*n.args[0], vars), eval_node(*n.args[1], vars));
    case K::Call: {
      const double a = eval_node(*n.args[0], vars);
      if (n.name == "sin") return std::sin(a);
      if (n.name == "cos") return std::cos(a);
      if (n.name == "tan") return std::tan(a);
      if (n.name == "sqrt") return std::sqrt(a);
      if (n.name == "abs") return std::abs(a);
      const double b = eval_node(*n.args[1], vars);
      return n.name == "min" ? std::min(a, b) : std::max(a, b);
    }
  }
  return 0.0;
}

std::string format_constant(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Expr::Expr(double constant)
    : root_(make(Node::Kind::Number, {}, constant)), text_(format_constant(constant)) {}

Expr Expr::parse(const std::string& text) {
  Expr e;
  Parser p(text, e.vars_);
  e.root_ = p.parse_all();
  e.text_ = text;
  return e;
}

double Expr::eval(const std::map<std::string, double>& vars) const { return eval_node(*root_, vars); }

const std::string* Expr::as_variable() const {
  return root_->kind == Node::Kind::Var ? &root_->name : nullptr;
}

}  // namespace eac
