#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpnp {

struct ExpressionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Compiled arithmetic expression over the variables x, y, z, t, V.
///
/// Supported: numeric literals, pi, e; + - * / ^; comparisons and
/// == != && ||  (yielding 0/1); cond ? a : b (both branches evaluated);
/// functions sin cos tan exp log sqrt abs tanh sign step floor min max pow.
/// Used for coefficient fields (epsilon, rho_f), boundary data, and
/// geometry predicates in config files.
class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view src);

  double eval(double x, double y = 0.0, double z = 0.0, double t = 0.0,
              double V = 0.0) const;

  bool empty() const { return code_.empty(); }

  /// True if the compiled expression references the given variable
  /// (one of "xyztV"); lets callers cache time-independent fields.
  bool depends_on(char var) const;

 private:
  struct Instr {
    int op;
    double value;  // literal payload for push ops
  };
  std::vector<Instr> code_;
  std::string source_;

  friend class ExprParser;
};

}  // namespace mpnp
