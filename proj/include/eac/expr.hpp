#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>

namespace eac {

/// Small arithmetic expression over named real variables, used by blueprint
/// files to derive part parameters and mounts from object-level parameters.
///
/// Grammar: numbers, identifiers, + - * / ^, unary minus, parentheses, the
/// functions sin cos tan sqrt abs min max, and the constant `pi`.
class Expr {
 public:
  Expr() : Expr(0.0) {}
  explicit Expr(double constant);
  /// Throws std::invalid_argument on syntax errors.
  static Expr parse(const std::string& text);

  double eval(const std::map<std::string, double>& vars) const;
  const std::set<std::string>& variables() const { return vars_; }
  bool is_constant() const { return vars_.empty(); }
  /// Name of the variable when the expression is exactly one identifier.
  const std::string* as_variable() const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::set<std::string> vars_;
  std::string text_;
};

}  // namespace eac
