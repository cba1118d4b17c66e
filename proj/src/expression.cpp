#include "mpnp/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace mpnp {

namespace {

enum Op {
  kPushConst,
  kPushX,
  kPushY,
  kPushZ,
  kPushT,
  kPushV,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kNeg,
  kLt,
  kLe,
  kGt,
  kGe,
  kEq,
  kNe,
  kAnd,
  kOr,
  kSelect,  // c a b -> c != 0 ? a : b
  kSin,
  kCos,
  kTan,
  kExp,
  kLog,
  kSqrt,
  kAbs,
  kTanh,
  kSign,
  kStep,
  kFloor,
  kMin,
  kMax,
};

struct FnEntry {
  const char* name;
  int op;
  int arity;
};

constexpr FnEntry kFunctions[] = {
    {"sin", kSin, 1},   {"cos", kCos, 1},   {"tan", kTan, 1},
    {"exp", kExp, 1},   {"log", kLog, 1},   {"sqrt", kSqrt, 1},
    {"abs", kAbs, 1},   {"tanh", kTanh, 1}, {"sign", kSign, 1},
    {"step", kStep, 1}, {"floor", kFloor, 1},
    {"min", kMin, 2},   {"max", kMax, 2},   {"pow", kPow, 2},
};

}  // namespace

class ExprParser {
 public:
  ExprParser(std::string_view src, Expression& out) : src_(src), out_(out) {}

  void run() {
    parse_ternary();
    skip_ws();
    if (pos_ != src_.size()) fail("trailing characters");

    // eval() uses a fixed 64-slot stack
    int depth = 0, max_depth = 0;
    for (const auto& in : out_.code_) {
      if (in.op <= kPushV) ++depth;
      else if (in.op == kSelect) depth -= 2;
      else if ((in.op >= kAdd && in.op <= kPow) ||
               (in.op >= kLt && in.op <= kOr) || in.op == kMin ||
               in.op == kMax)
        --depth;
      max_depth = std::max(max_depth, depth);
    }
    if (max_depth > 63) fail("expression too deeply nested");
  }

 private:
  std::string_view src_;
  Expression& out_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ExpressionError("expression error at offset " +
                          std::to_string(pos_) + ": " + what + " in '" +
                          std::string(src_) + "'");
  }

  void emit(int op, double v = 0.0) { out_.code_.push_back({op, v}); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (src_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  // ternary := or ('?' ternary ':' ternary)?
  void parse_ternary() {
    parse_or();
    if (accept("?")) {
      parse_ternary();
      if (!accept(":")) fail("expected ':'");
      parse_ternary();
      emit(kSelect);
    }
  }

  void parse_or() {
    parse_and();
    while (accept("||")) {
      parse_and();
      emit(kOr);
    }
  }

  void parse_and() {
    parse_cmp();
    while (accept("&&")) {
      parse_cmp();
      emit(kAnd);
    }
  }

  void parse_cmp() {
    parse_sum();
    for (;;) {
      if (accept("<=")) {
        parse_sum();
        emit(kLe);
      } else if (accept(">=")) {
        parse_sum();
        emit(kGe);
      } else if (accept("==")) {
        parse_sum();
        emit(kEq);
      } else if (accept("!=")) {
        parse_sum();
        emit(kNe);
      } else if (peek() == '<') {
        ++pos_;
        parse_sum();
        emit(kLt);
      } else if (peek() == '>') {
        ++pos_;
        parse_sum();
        emit(kGt);
      } else {
        return;
      }
    }
  }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept("+")) {
        parse_product();
        emit(kAdd);
      } else if (peek() == '-') {
        ++pos_;
        parse_product();
        emit(kSub);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept("*")) {
        parse_unary();
        emit(kMul);
      } else if (accept("/")) {
        parse_unary();
        emit(kDiv);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept("-")) {
      parse_unary();
      emit(kNeg);
      return;
    }
    (void)accept("+");
    parse_power();
  }

  // right-associative; -x^2 parses as -(x^2)
  void parse_power() {
    parse_primary();
    if (accept("^")) {
      parse_unary();
      emit(kPow);
    }
  }

  void parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end");
    const char c = src_[pos_];

    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src_.data() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      emit(kPushConst, v);
      return;
    }

    if (c == '(') {
      ++pos_;
      parse_ternary();
      if (!accept(")")) fail("expected ')'");
      return;
    }

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = pos_;
      while (j < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
        ++j;
      const std::string_view name = src_.substr(pos_, j - pos_);
      pos_ = j;

      if (name == "x") return emit(kPushX);
      if (name == "y") return emit(kPushY);
      if (name == "z") return emit(kPushZ);
      if (name == "t") return emit(kPushT);
      if (name == "V") return emit(kPushV);
      if (name == "pi") return emit(kPushConst, M_PI);
      if (name == "e") return emit(kPushConst, M_E);

      for (const auto& fn : kFunctions) {
        if (name == fn.name) {
          if (!accept("(")) fail("expected '(' after function");
          parse_ternary();
          for (int a = 1; a < fn.arity; ++a) {
            if (!accept(",")) fail("expected ','");
            parse_ternary();
          }
          if (!accept(")")) fail("expected ')'");
          emit(fn.op);
          return;
        }
      }
      fail("unknown identifier '" + std::string(name) + "'");
    }

    fail(std::string("unexpected character '") + c + "'");
  }
};

Expression Expression::parse(std::string_view src) {
  Expression e;
  e.source_ = std::string(src);
  ExprParser(src, e).run();
  return e;
}

double Expression::eval(double x, double y, double z, double t,
                        double V) const {
  double stack[64];
  int top = -1;
  for (const Instr& in : code_) {
    switch (in.op) {
      case kPushConst: stack[++top] = in.value; break;
      case kPushX: stack[++top] = x; break;
      case kPushY: stack[++top] = y; break;
      case kPushZ: stack[++top] = z; break;
      case kPushT: stack[++top] = t; break;
      case kPushV: stack[++top] = V; break;
      case kAdd: stack[top - 1] += stack[top]; --top; break;
      case kSub: stack[top - 1] -= stack[top]; --top; break;
      case kMul: stack[top - 1] *= stack[top]; --top; break;
      case kDiv: stack[top - 1] /= stack[top]; --top; break;
      case kPow: stack[top - 1] = std::pow(stack[top - 1], stack[top]); --top; break;
      case kNeg: stack[top] = -stack[top]; break;
      case kLt: stack[top - 1] = stack[top - 1] < stack[top] ? 1.0 : 0.0; --top; break;
      case kLe: stack[top - 1] = stack[top - 1] <= stack[top] ? 1.0 : 0.0; --top; break;
      case kGt: stack[top - 1] = stack[top - 1] > stack[top] ? 1.0 : 0.0; --top; break;
      case kGe: stack[top - 1] = stack[top - 1] >= stack[top] ? 1.0 : 0.0; --top; break;
      case kEq: stack[top - 1] = stack[top - 1] == stack[top] ? 1.0 : 0.0; --top; break;
      case kNe: stack[top - 1] = stack[top - 1] != stack[top] ? 1.0 : 0.0; --top; break;
      case kAnd: stack[top - 1] = (stack[top - 1] != 0.0 && stack[top] != 0.0) ? 1.0 : 0.0; --top; break;
      case kOr: stack[top - 1] = (stack[top - 1] != 0.0 || stack[top] != 0.0) ? 1.0 : 0.0; --top; break;
      case kSelect:
        stack[top - 2] = stack[top - 2] != 0.0 ? stack[top - 1] : stack[top];
        top -= 2;
        break;
      case kSin: stack[top] = std::sin(stack[top]); break;
      case kCos: stack[top] = std::cos(stack[top]); break;
      case kTan: stack[top] = std::tan(stack[top]); break;
      case kExp: stack[top] = std::exp(stack[top]); break;
      case kLog: stack[top] = std::log(stack[top]); break;
      case kSqrt: stack[top] = std::sqrt(stack[top]); break;
      case kAbs: stack[top] = std::fabs(stack[top]); break;
      case kTanh: stack[top] = std::tanh(stack[top]); break;
      case kSign: stack[top] = stack[top] > 0.0 ? 1.0 : (stack[top] < 0.0 ? -1.0 : 0.0); break;
      case kStep: stack[top] = stack[top] >= 0.0 ? 1.0 : 0.0; break;
      case kFloor: stack[top] = std::floor(stack[top]); break;
      case kMin: stack[top - 1] = std::min(stack[top - 1], stack[top]); --top; break;
      case kMax: stack[top - 1] = std::max(stack[top - 1], stack[top]); --top; break;
      default: break;
    }
  }
  return top >= 0 ? stack[top] : 0.0;
}

bool Expression::depends_on(char var) const {
  int op;
  switch (var) {
    case 'x': op = kPushX; break;
    case 'y': op = kPushY; break;
    case 'z': op = kPushZ; break;
    case 't': op = kPushT; break;
    case 'V': op = kPushV; break;
    default: return false;
  }
  for (const Instr& in : code_)
    if (in.op == op) return true;
  return false;
}

}  // namespace mpnp
