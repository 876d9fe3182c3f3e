#include "tarl/ast.hpp"

namespace tarl::lang {

namespace {

std::vector<ExprPtr> clone_all(const std::vector<ExprPtr>& xs) {
    std::vector<ExprPtr> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(x->clone());
    return out;
}

std::vector<StmtPtr> clone_all(const std::vector<StmtPtr>& xs) {
    std::vector<StmtPtr> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(x->clone());
    return out;
}

bool equal_all(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!a[i]->equals(*b[i])) return false;
    return true;
}

bool equal_all(const std::vector<StmtPtr>& a, const std::vector<StmtPtr>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!a[i]->equals(*b[i])) return false;
    return true;
}

bool equal_opt(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    return a->equals(*b);
}

}

ExprPtr Expr::clone() const {
    auto out = std::make_unique<Expr>(kind);
    out->num_value = num_value;
    out->num_text = num_text;
    out->bool_value = bool_value;
    out->str_value = str_value;
    out->name = name;
    out->parts = parts;
    out->bin_op = bin_op;
    out->cmp_op = cmp_op;
    out->fold = fold;
    out->un_op = un_op;
    if (lhs) out->lhs = lhs->clone();
    if (rhs) out->rhs = rhs->clone();
    if (operand) out->operand = operand->clone();
    out->operands = clone_all(operands);
    if (callee) out->callee = callee->clone();
    out->args.reserve(args.size());
    for (const auto& a : args) out->args.push_back({a.keyword, a.value->clone()});
    return out;
}

bool Expr::equals(const Expr& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
        case Kind::Num:
            return num_text == o.num_text && num_value == o.num_value;
        case Kind::Bool:
            return bool_value == o.bool_value;
        case Kind::Str:
            return str_value == o.str_value;
        case Kind::Ident:
            return name == o.name;
        case Kind::Attr:
            return parts == o.parts;
        case Kind::Binary:
            return bin_op == o.bin_op && equal_opt(lhs, o.lhs) && equal_opt(rhs, o.rhs);
        case Kind::Compare:
            return cmp_op == o.cmp_op && equal_opt(lhs, o.lhs) && equal_opt(rhs, o.rhs);
        case Kind::BoolChain:
            return fold == o.fold && equal_all(operands, o.operands);
        case Kind::Unary:
            return un_op == o.un_op && equal_opt(operand, o.operand);
        case Kind::Call: {
            if (!equal_opt(callee, o.callee) || args.size() != o.args.size()) return false;
            for (size_t i = 0; i < args.size(); ++i) {
                if (args[i].keyword != o.args[i].keyword) return false;
                if (!args[i].value->equals(*o.args[i].value)) return false;
            }
            return true;
        }
    }
    return false;
}

ExprPtr Expr::make_num(double value, std::string text) {
    auto e = std::make_unique<Expr>(Kind::Num);
    e->num_value = value;
    e->num_text = std::move(text);
    return e;
}

ExprPtr Expr::make_bool(bool value) {
    auto e = std::make_unique<Expr>(Kind::Bool);
    e->bool_value = value;
    return e;
}

ExprPtr Expr::make_str(std::string value) {
    auto e = std::make_unique<Expr>(Kind::Str);
    e->str_value = std::move(value);
    return e;
}

ExprPtr Expr::make_ident(std::string name) {
    auto e = std::make_unique<Expr>(Kind::Ident);
    e->name = std::move(name);
    return e;
}

ExprPtr Expr::make_attr(std::vector<std::string> parts) {
    auto e = std::make_unique<Expr>(Kind::Attr);
    e->parts = std::move(parts);
    return e;
}

ExprPtr Expr::make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_unique<Expr>(Kind::Binary);
    e->bin_op = op;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
}

ExprPtr Expr::make_compare(CompareOp op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_unique<Expr>(Kind::Compare);
    e->cmp_op = op;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
}

ExprPtr Expr::make_bool_chain(BoolFold fold, std::vector<ExprPtr> operands) {
    auto e = std::make_unique<Expr>(Kind::BoolChain);
    e->fold = fold;
    e->operands = std::move(operands);
    return e;
}

ExprPtr Expr::make_unary(UnaryOp op, ExprPtr operand) {
    auto e = std::make_unique<Expr>(Kind::Unary);
    e->un_op = op;
    e->operand = std::move(operand);
    return e;
}

ExprPtr Expr::make_call(ExprPtr callee, std::vector<CallArg> args) {
    auto e = std::make_unique<Expr>(Kind::Call);
    e->callee = std::move(callee);
    e->args = std::move(args);
    return e;
}

const std::string& Expr::root() const {
    static const std::string empty;
    if (kind == Kind::Ident) return name;
    if (kind == Kind::Attr && !parts.empty()) return parts[0];
    return empty;
}

StmtPtr Stmt::clone() const {
    auto out = std::make_unique<Stmt>(kind);
    out->line = line;
    out->column = column;
    out->name = name;
    out->params = params;
    out->body = clone_all(body);
    out->targets = clone_all(targets);
    out->values = clone_all(values);
    out->names = names;
    if (cond) out->cond = cond->clone();
    out->else_body = clone_all(else_body);
    out->exception_path = exception_path;
    out->handler = clone_all(handler);
    if (expr) out->expr = expr->clone();
    return out;
}

bool Stmt::equals(const Stmt& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
        case Kind::FuncDef:
            return name == o.name && params == o.params && equal_all(body, o.body);
        case Kind::Assign:
        case Kind::MultiAssign:
            return equal_all(targets, o.targets) && equal_all(values, o.values);
        case Kind::Global:
            return names == o.names;
        case Kind::While:
            return equal_opt(cond, o.cond) && equal_all(body, o.body);
        case Kind::If:
            return equal_opt(cond, o.cond) && equal_all(body, o.body) &&
                   equal_all(else_body, o.else_body);
        case Kind::TryExcept:
            return exception_path == o.exception_path && equal_all(body, o.body) &&
                   equal_all(handler, o.handler);
        case Kind::ExprStmt:
            return equal_opt(expr, o.expr);
        case Kind::Pass:
            return true;
    }
    return false;
}

Program Program::clone() const {
    Program out;
    out.statements = clone_all(statements);
    return out;
}

bool Program::equals(const Program& other) const {
    return equal_all(statements, other.statements);
}

namespace {

template <typename P, typename S, typename F>
void walk(std::vector<S>& stmts, const F& fn) {
    for (auto& s : stmts) {
        fn(*s);
        walk<P>(s->body, fn);
        walk<P>(s->else_body, fn);
        walk<P>(s->handler, fn);
    }
}

}

void for_each_stmt(const Program& program, const std::function<void(const Stmt&)>& fn) {
    walk<const Program>(const_cast<Program&>(program).statements,
                        [&](Stmt& s) { fn(static_cast<const Stmt&>(s)); });
}

void for_each_stmt(Program& program, const std::function<void(Stmt&)>& fn) {
    walk<Program>(program.statements, fn);
}

const Stmt* entry_guard(const Program& program) {
    for (const auto& s : program.statements) {
        if (s->kind != Stmt::Kind::If || !s->cond) continue;
        const Expr& c = *s->cond;
        if (c.kind != Expr::Kind::Compare || c.cmp_op != CompareOp::Eq) continue;
        if (c.lhs && c.lhs->kind == Expr::Kind::Ident && c.lhs->name == "__name__" &&
            c.rhs && c.rhs->kind == Expr::Kind::Str && c.rhs->str_value == "__main__")
            return s.get();
    }
    return nullptr;
}

}
