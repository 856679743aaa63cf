#include "ssr/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ssr/error.hpp"

namespace ssr {

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  Expression run() {
    Expression e;
    e.text_ = std::string(text_);
    out_ = &e;
    e.root_ = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  using Op = Expression::Op;
  using Node = Expression::Node;

  std::string_view text_;
  std::size_t pos_ = 0;
  Expression* out_ = nullptr;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  int add(Node n) {
    out_->nodes_.push_back(n);
    return static_cast<int>(out_->nodes_.size()) - 1;
  }

  int binary(Op op, int lhs, int rhs) {
    Node n{op};
    n.lhs = lhs;
    n.rhs = rhs;
    return add(n);
  }

  int parse_expr() {
    int lhs = parse_term();
    while (true) {
      if (accept('+')) lhs = binary(Op::Add, lhs, parse_term());
      else if (accept('-')) lhs = binary(Op::Sub, lhs, parse_term());
      else return lhs;
    }
  }

  int parse_term() {
    int lhs = parse_factor();
    while (true) {
      if (accept('*')) lhs = binary(Op::Mul, lhs, parse_factor());
      else if (accept('/')) lhs = binary(Op::Div, lhs, parse_factor());
      else return lhs;
    }
  }

  std::string_view identifier() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  int parse_index() {
    expect('[');
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected an index");
    int value = 0;
    std::from_chars(text_.data() + start, text_.data() + pos_, value);
    expect(']');
    return value;
  }

  int parse_number() {
    const std::size_t start = pos_;
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value,
                                           std::chars_format::general);
    if (ec != std::errc{}) fail("malformed number");
    pos_ = static_cast<std::size_t>(end - text_.data());
    if (pos_ == start) fail("malformed number");
    Node n{Op::Number};
    n.value = value;
    return add(n);
  }

  int parse_factor() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      Node n{Op::Neg};
      n.lhs = parse_factor();
      return add(n);
    }
    if (c == '(') {
      ++pos_;
      const int inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      const std::string_view name = identifier();
      Node n{Op::Var};
      if (name == "x" || name == "u" || name == "theta") {
        n.kind = name == "x" ? Variable::State : name == "u" ? Variable::Input : Variable::Parameter;
        n.index = parse_index();
        return add(n);
      }
      if (name == "sin") n.op = Op::Sin;
      else if (name == "cos") n.op = Op::Cos;
      else if (name == "exp") n.op = Op::Exp;
      else if (name == "abs") n.op = Op::Abs;
      else {
        pos_ = start;
        fail("unknown identifier '" + std::string(name) + "'");
      }
      expect('(');
      n.lhs = parse_expr();
      expect(')');
      return add(n);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

Expression Expression::parse(std::string_view text) { return ExpressionParser(text).run(); }

Expression Expression::constant(double value) {
  Expression e;
  std::ostringstream os;
  os.precision(17);
  os << value;
  e.text_ = os.str();
  e.nodes_.push_back(Node{Op::Number, value});
  e.root_ = 0;
  return e;
}

int Expression::max_index(Variable kind) const noexcept {
  int best = -1;
  for (const auto& n : nodes_) {
    if (n.op == Op::Var && n.kind == kind) best = std::max(best, n.index);
  }
  return best;
}

std::vector<int> Expression::indices(Variable kind) const {
  std::vector<int> out;
  for (const auto& n : nodes_) {
    if (n.op == Op::Var && n.kind == kind) out.push_back(n.index);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool Expression::is_constant() const noexcept {
  for (const auto& n : nodes_) {
    if (n.op == Op::Var) return false;
  }
  return true;
}

double Expression::evaluate(std::span<const double> x, std::span<const double> u,
                            std::span<const double> theta) const {
  const double value = eval_node(root_, x, u, theta);
  if (!std::isfinite(value)) throw std::domain_error("expression '" + text_ + "' is not finite");
  return value;
}

double Expression::eval_node(int id, std::span<const double> x, std::span<const double> u,
                             std::span<const double> theta) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  switch (n.op) {
    case Op::Number:
      return n.value;
    case Op::Var: {
      const auto& source = n.kind == Variable::State ? x : n.kind == Variable::Input ? u : theta;
      require(static_cast<std::size_t>(n.index) < source.size(),
              "expression '" + text_ + "' references an index beyond the supplied vector");
      return source[static_cast<std::size_t>(n.index)];
    }
    case Op::Add:
      return eval_node(n.lhs, x, u, theta) + eval_node(n.rhs, x, u, theta);
    case Op::Sub:
      return eval_node(n.lhs, x, u, theta) - eval_node(n.rhs, x, u, theta);
    case Op::Mul:
      return eval_node(n.lhs, x, u, theta) * eval_node(n.rhs, x, u, theta);
    case Op::Div: {
      const double den = eval_node(n.rhs, x, u, theta);
      if (den == 0.0) throw std::domain_error("division by zero in '" + text_ + "'");
      return eval_node(n.lhs, x, u, theta) / den;
    }
    case Op::Neg:
      return -eval_node(n.lhs, x, u, theta);
    case Op::Sin:
      return std::sin(eval_node(n.lhs, x, u, theta));
    case Op::Cos:
      return std::cos(eval_node(n.lhs, x, u, theta));
    case Op::Exp:
      return std::exp(eval_node(n.lhs, x, u, theta));
    case Op::Abs:
      return std::abs(eval_node(n.lhs, x, u, theta));
  }
  return 0.0;
}

}  // namespace ssr
