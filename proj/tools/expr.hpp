#pragma once

#include "phaselab/core.hpp"

#include <memory>
#include <string>
#include <vector>

namespace phaselab::cli {

// Real-valued expression over (x, ξ).
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'x' | 'xi' | 'ξ' | 'pi' | name '(' args ')' | '(' expr ')' | '⟨' args '⟩'
// Functions: exp, sqrt, log, sin, cos, abs, erfc, br. br(a, b, ...) and ⟨a, b, ...⟩ are the bracket
// sqrt(1 + a² + b² + ...); a parenthesised tuple inside a bracket is flattened, so ⟨(x, xi)⟩ = br(x, xi).
class SymbolExpr {
public:
    struct Node;

    double operator()(double x, double xi) const;
    const std::string& text() const { return text_; }

    friend SymbolExpr parse_symbol_expr(const std::string& text);

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

inline constexpr std::size_t max_expr_length = 4096;

// Throws ParseError (line 1, 1-based column in code points) on malformed input. At end of input the column is
// that of the innermost unclosed bracket, if any.
SymbolExpr parse_symbol_expr(const std::string& text);

}  // namespace phaselab::cli
