#pragma once

#include <string>
#include <vector>

#include "tarl/ast.hpp"

namespace tarl::lang {

// Parses a complete source text. `path` only labels error messages.
Program parse(const std::string& text, const std::string& path = "<input>");

// Canonical text: 4-space indent, single spaces around binary operators,
// kwargs as k=v, strings single-quoted. parse(unparse(p)) equals p.
std::string unparse(const Program& program);

// One statement rendered on one line, headers without the trailing colon
// ("while True", "if x == 1"). Used for report text fields.
std::string stmt_text(const Stmt& stmt);
std::string expr_text(const Expr& expr);

struct NumericLiteralRef {
    Stmt* stmt;          // statement owning the literal
    Expr* literal;       // Kind::Num node
    int ordinal;         // 0-based, in statement-then-left-to-right order
};

// Every numeric literal inside function bodies, in deterministic order.
// Literals in top-level statements are excluded.
std::vector<NumericLiteralRef> find_numeric_literals(Program& program);

}
