#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssr {

enum class Variable { State, Input, Parameter };

/// Arithmetic expression over x[i], u[i] and theta[i].
///
/// Grammar (whitespace is ignored):
///
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := number | var | func '(' expr ')' | '(' expr ')' | '-' factor
///   var    := 'x[' int ']' | 'u[' int ']' | 'theta[' int ']'
///   func   := 'sin' | 'cos' | 'exp' | 'abs'
class Expression {
 public:
  /// Throws ParseError with the offending character offset.
  static Expression parse(std::string_view text);

  /// A constant expression.
  static Expression constant(double value);

  /// Throws std::domain_error on division by zero or a non-finite result.
  /// Out-of-range variable indices throw ContractViolation.
  double evaluate(std::span<const double> x, std::span<const double> u,
                  std::span<const double> theta) const;

  /// Largest referenced index of the given kind, or -1 when unused.
  int max_index(Variable kind) const noexcept;
  bool depends_on(Variable kind) const noexcept { return max_index(kind) >= 0; }
  /// Sorted distinct indices of the given kind.
  std::vector<int> indices(Variable kind) const;
  bool is_constant() const noexcept;

  const std::string& text() const noexcept { return text_; }

 private:
  enum class Op { Number, Var, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp, Abs };
  struct Node {
    Op op;
    double value = 0.0;
    Variable kind = Variable::State;
    int index = 0;
    int lhs = -1;
    int rhs = -1;
  };

  std::string text_;
  std::vector<Node> nodes_;
  int root_ = -1;

  double eval_node(int id, std::span<const double> x, std::span<const double> u,
                   std::span<const double> theta) const;

  friend class ExpressionParser;
};

}  // namespace ssr
