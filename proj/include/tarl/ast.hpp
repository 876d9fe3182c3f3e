#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tarl::lang {

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class BinaryOp { Add, Sub, Mul, Div };
enum class CompareOp { Lt, Gt, Le, Ge, Eq, Ne };
enum class BoolFold { And, Or };
enum class UnaryOp { Neg, Pos };

struct CallArg {
    std::optional<std::string> keyword;  // `anonymous=True` style; ignored at run time
    ExprPtr value;
};

// Single tagged struct rather than a class hierarchy; only the fields for the
// active kind are meaningful.
struct Expr {
    enum class Kind { Num, Bool, Str, Ident, Attr, Binary, Compare, BoolChain, Unary, Call };

    Kind kind;

    double num_value = 0.0;
    std::string num_text;  // exact source spelling, reused verbatim on unparse
    bool bool_value = false;
    std::string str_value;
    std::string name;                 // Ident
    std::vector<std::string> parts;   // Attr, parts[0] is the root variable

    BinaryOp bin_op{};
    CompareOp cmp_op{};
    BoolFold fold{};
    UnaryOp un_op{};
    ExprPtr lhs, rhs;
    ExprPtr operand;
    std::vector<ExprPtr> operands;  // BoolChain, left to right

    ExprPtr callee;  // Ident or Attr
    std::vector<CallArg> args;

    explicit Expr(Kind k) : kind(k) {}

    ExprPtr clone() const;
    // Structural equality; ignores nothing else because Expr carries no
    // location info.
    bool equals(const Expr& other) const;

    static ExprPtr make_num(double value, std::string text);
    static ExprPtr make_bool(bool value);
    static ExprPtr make_str(std::string value);
    static ExprPtr make_ident(std::string name);
    static ExprPtr make_attr(std::vector<std::string> parts);
    static ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
    static ExprPtr make_compare(CompareOp op, ExprPtr lhs, ExprPtr rhs);
    static ExprPtr make_bool_chain(BoolFold fold, std::vector<ExprPtr> operands);
    static ExprPtr make_unary(UnaryOp op, ExprPtr operand);
    static ExprPtr make_call(ExprPtr callee, std::vector<CallArg> args);

    // Root variable of an Ident or Attr; empty otherwise.
    const std::string& root() const;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
    enum class Kind { FuncDef, Assign, MultiAssign, Global, While, If, TryExcept, ExprStmt, Pass };

    Kind kind;
    int line = 0;
    int column = 0;

    std::string name;                  // FuncDef
    std::vector<std::string> params;   // FuncDef
    std::vector<StmtPtr> body;         // FuncDef / While / If / TryExcept(try block)

    std::vector<ExprPtr> targets;  // Assign (1) / MultiAssign (2+), Ident or Attr
    std::vector<ExprPtr> values;   // same arity as targets

    std::vector<std::string> names;  // Global

    ExprPtr cond;                     // While / If
    std::vector<StmtPtr> else_body;   // If, may be empty

    std::string exception_path;     // TryExcept, dotted
    std::vector<StmtPtr> handler;   // TryExcept

    ExprPtr expr;  // ExprStmt

    explicit Stmt(Kind k) : kind(k) {}

    StmtPtr clone() const;
    // Structural equality; line/column are excluded so that unparse+parse
    // round trips compare equal.
    bool equals(const Stmt& other) const;
};

struct Program {
    std::vector<StmtPtr> statements;

    Program() = default;
    Program(Program&&) = default;
    Program& operator=(Program&&) = default;

    Program clone() const;
    bool equals(const Program& other) const;
};

// Depth-first visit of every statement, bodies included.
void for_each_stmt(const Program& program, const std::function<void(const Stmt&)>& fn);
void for_each_stmt(Program& program, const std::function<void(Stmt&)>& fn);

// The `if __name__ == '__main__'` top-level statement, or nullptr.
const Stmt* entry_guard(const Program& program);

}
